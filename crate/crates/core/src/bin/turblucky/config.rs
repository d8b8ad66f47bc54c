//! Resolved per-command configuration: JSON file values overlaid by flags.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use turblucky::analysis::CorrelationConfig;
use turblucky::fusion::{INVERSE_VOXEL_EPS, INVERSE_VOXEL_WINDOW};
use turblucky::sim::{EventSimConfig, TurbulenceConfig};
use turblucky::train::{LossConfig, PerceptualMode, TrainConfig};
use turblucky::{Error, Result};

/// Builds `R` from its defaults, then the config file, then the flags.
///
/// `flags` serializes with `null` for absent options and `false` for unset
/// switches; both leave the lower layer untouched.
pub fn resolve<F: Serialize, R: DeserializeOwned>(file: Option<&Path>, flags: &F) -> Result<R> {
    let mut merged = match file {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.to_path_buf(),
                source: e,
            })?;
            match serde_json::from_str(&text) {
                Ok(Value::Object(map)) => map,
                Ok(_) => return Err(Error::Usage(format!("{}: expected a JSON object", path.display()))),
                Err(e) => return Err(Error::Usage(format!("{}: {e}", path.display()))),
            }
        }
        None => Map::new(),
    };
    let Value::Object(given) = serde_json::to_value(flags).map_err(|e| Error::Usage(e.to_string()))? else {
        unreachable!("flag structs serialize to objects")
    };
    for (key, value) in given {
        if !matches!(value, Value::Null | Value::Bool(false)) {
            merged.insert(key, value);
        }
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| Error::Usage(e.to_string()))
}

pub fn required<'a>(path: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    path.as_deref()
        .ok_or_else(|| Error::Usage(format!("--{flag} is required")))
}

/// Parses `WIDTHxHEIGHT`.
pub fn parse_size(text: &str) -> Result<(usize, usize)> {
    let bad = || Error::Usage(format!("size {text:?} is not WIDTHxHEIGHT"));
    let (w, h) = text.split_once(['x', 'X']).ok_or_else(bad)?;
    let w: usize = w.trim().parse().map_err(|_| bad())?;
    let h: usize = h.trim().parse().map_err(|_| bad())?;
    Ok((w, h))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub out: Option<PathBuf>,
    pub samples: usize,
    pub size: String,
    pub frames: usize,
    pub frame_interval_us: u64,
    pub channels: usize,
    pub seed: u64,
    pub clean_dir: Option<PathBuf>,
    pub tilt: f64,
    pub correlation_length: f64,
    pub rho: f64,
    /// Unset means the default blur, or none when `tilt` is zero.
    pub blur: Option<f64>,
    pub supersample: usize,
    pub intermittency: f64,
    pub contrast_threshold: f64,
    pub log_eps: f64,
    pub noise_rate: f64,
    pub force: bool,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        let t = TurbulenceConfig::default();
        let e = EventSimConfig::default();
        Self {
            out: None,
            samples: 8,
            size: "64x64".into(),
            frames: 11,
            frame_interval_us: 10_000,
            channels: 3,
            seed: 0,
            clean_dir: None,
            tilt: t.tilt_sigma,
            correlation_length: t.correlation_length,
            rho: t.temporal_correlation,
            blur: None,
            supersample: t.supersample,
            intermittency: t.intermittency,
            contrast_threshold: e.contrast_threshold,
            log_eps: e.log_eps,
            noise_rate: e.noise_rate,
            force: false,
        }
    }
}

impl SimulateConfig {
    /// Fills in the blur so the echoed configuration is complete.
    pub fn finish(mut self) -> Self {
        if self.blur.is_none() {
            let default = TurbulenceConfig::default().blur_sigma;
            self.blur = Some(if self.tilt == 0.0 { 0.0 } else { default });
        }
        self
    }

    pub fn turbulence(&self) -> TurbulenceConfig {
        TurbulenceConfig {
            tilt_sigma: self.tilt,
            correlation_length: self.correlation_length,
            temporal_correlation: self.rho,
            blur_sigma: self.blur.unwrap_or(TurbulenceConfig::default().blur_sigma),
            supersample: self.supersample,
            intermittency: self.intermittency,
            seed: self.seed,
        }
    }

    pub fn events(&self) -> EventSimConfig {
        EventSimConfig {
            contrast_threshold: self.contrast_threshold,
            log_eps: self.log_eps,
            noise_rate: self.noise_rate,
            seed: self.seed,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Mean,
    InverseVoxel,
    Egtm,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Mean => "mean",
            Method::InverseVoxel => "inverse-voxel",
            Method::Egtm => "egtm",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FuseConfig {
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub method: Option<Method>,
    pub model: Option<PathBuf>,
    pub window: usize,
    pub eps: f64,
}

impl Default for FuseConfig {
    fn default() -> Self {
        Self {
            data: None,
            out: None,
            method: None,
            model: None,
            window: INVERSE_VOXEL_WINDOW,
            eps: INVERSE_VOXEL_EPS,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainRunConfig {
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    pub val_fraction: f64,
    pub lambda: f64,
    pub no_perceptual: bool,
    pub deterministic: bool,
}

impl Default for TrainRunConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            data: None,
            out: None,
            epochs: t.epochs,
            batch_size: t.batch_size,
            lr: t.lr0,
            beta1: t.beta1,
            beta2: t.beta2,
            adam_eps: t.adam_eps,
            seed: t.seed,
            val_fraction: t.val_fraction,
            lambda: LossConfig::default().lambda,
            no_perceptual: false,
            deterministic: false,
        }
    }
}

impl TrainRunConfig {
    pub fn train(&self) -> TrainConfig {
        TrainConfig {
            lr0: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            adam_eps: self.adam_eps,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed: self.seed,
            deterministic: self.deterministic,
            val_fraction: self.val_fraction,
        }
    }

    pub fn loss(&self) -> LossConfig {
        LossConfig {
            lambda: self.lambda,
            perceptual_mode: if self.no_perceptual {
                PerceptualMode::Off
            } else {
                PerceptualMode::GradientSurrogate
            },
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub window: usize,
    pub eps: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            data: None,
            out: None,
            model: None,
            window: INVERSE_VOXEL_WINDOW,
            eps: INVERSE_VOXEL_EPS,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeConfig {
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub samples: usize,
    pub pixels: usize,
    pub spatial_sizes: Vec<usize>,
    pub temporal_windows_ms: Vec<f64>,
    pub spatial_window_ms: f64,
    pub seed: u64,
}

impl Default for AnalyzeConfig {
    fn default() -> Self {
        let c = CorrelationConfig::default();
        Self {
            data: None,
            out: None,
            samples: c.n_samples,
            pixels: c.pixels_per_sample,
            spatial_sizes: c.spatial_sizes,
            temporal_windows_ms: c.temporal_windows_ms,
            spatial_window_ms: c.spatial_window_ms,
            seed: c.seed,
        }
    }
}

impl AnalyzeConfig {
    pub fn correlation(&self) -> CorrelationConfig {
        CorrelationConfig {
            n_samples: self.samples,
            pixels_per_sample: self.pixels,
            spatial_sizes: self.spatial_sizes.clone(),
            temporal_windows_ms: self.temporal_windows_ms.clone(),
            spatial_window_ms: self.spatial_window_ms,
            seed: self.seed,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamsConfig {
    pub frames: usize,
    pub channels: usize,
    pub size: String,
}

impl Default for ParamsConfig {
    fn default() -> Self {
        Self {
            frames: 11,
            channels: 3,
            size: "256x256".into(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Flags {
        samples: Option<usize>,
        force: bool,
    }

    #[test]
    fn flags_override_file_which_overrides_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"samples": 3, "seed": 5, "force": true}"#).unwrap();
        let flags = Flags {
            samples: Some(7),
            force: false,
        };
        let cfg: SimulateConfig = resolve(Some(&path), &flags).unwrap();
        assert_eq!((cfg.samples, cfg.seed, cfg.force), (7, 5, true));
        assert_eq!(cfg.frames, 11);
        let none = Flags {
            samples: None,
            force: false,
        };
        let cfg: SimulateConfig = resolve(None, &none).unwrap();
        assert_eq!(cfg.samples, 8);
    }

    #[test]
    fn unknown_keys_are_usage_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"sampels": 3}"#).unwrap();
        let flags = Flags {
            samples: None,
            force: false,
        };
        let err = resolve::<_, SimulateConfig>(Some(&path), &flags).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn sizes_parse() {
        assert_eq!(parse_size("64x48").unwrap(), (64, 48));
        assert!(parse_size("64").is_err());
        assert!(parse_size("ax4").is_err());
    }

    #[test]
    fn zero_tilt_disables_default_blur() {
        let cfg = SimulateConfig {
            tilt: 0.0,
            ..SimulateConfig::default()
        }
        .finish();
        assert_eq!(cfg.blur, Some(0.0));
        assert_eq!(SimulateConfig::default().finish().blur, Some(0.8));
    }
}
