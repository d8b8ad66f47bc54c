use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{
    parse_size, required, AnalyzeConfig, EvalConfig, FuseConfig, Method, ParamsConfig,
    SimulateConfig, TrainRunConfig,
};
use turblucky::analysis::{correlation_study, psnr, ssim};
use turblucky::data::{load_dataset, sample_dir_name, save_sample, Image, Sample, SAMPLE_DIR_PREFIX};
use turblucky::edem::{voxelize, VoxelConfig};
use turblucky::fusion::{egtm_restore, inverse_voxel_weights, lucky_fuse};
use turblucky::net::{count_params_flops, ModelParams, NetConfig};
use turblucky::sim::{simulate_procedural_dataset, simulate_sample, DatasetShape};
use turblucky::train::{metrics_csv, train as run_training};
use turblucky::{Error, Result};

const RUN_CONFIG: &str = "run_config.json";

fn io<T>(path: &Path, r: std::io::Result<T>) -> Result<T> {
    r.map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn write(path: &Path, text: &str) -> Result<()> {
    io(path, fs::write(path, text))
}

fn create_dir(dir: &Path) -> Result<()> {
    io(dir, fs::create_dir_all(dir))
}

/// JSON number, or the string `"inf"` for unbounded PSNR.
fn num(v: f64) -> Value {
    if v.is_infinite() {
        Value::String(if v > 0.0 { "inf" } else { "-inf" }.into())
    } else {
        json!(v)
    }
}

/// Echoes the resolved configuration next to the outputs and prints the run
/// summary as one JSON document on stdout.
fn report<C: Serialize>(command: &str, config: &C, out: Option<&Path>, result: Value) -> Result<()> {
    let config = serde_json::to_value(config).map_err(|e| Error::Numeric(e.to_string()))?;
    if let Some(dir) = out {
        let text = serde_json::to_string_pretty(&config).expect("values serialize");
        write(&dir.join(RUN_CONFIG), &format!("{text}\n"))?;
    }
    let doc = json!({ "command": command, "config": config, "result": result });
    println!("{}", serde_json::to_string_pretty(&doc).expect("values serialize"));
    Ok(())
}

fn prepare_output(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() {
        let mut entries = io(dir, fs::read_dir(dir))?.peekable();
        if entries.peek().is_some() {
            if !force {
                return Err(Error::Usage(format!(
                    "{} is not empty; pass --force to replace its samples",
                    dir.display()
                )));
            }
            for entry in entries {
                let path = io(dir, entry)?.path();
                let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
                if name.starts_with(SAMPLE_DIR_PREFIX) && path.is_dir() {
                    io(&path, fs::remove_dir_all(&path))?;
                } else if name == RUN_CONFIG {
                    io(&path, fs::remove_file(&path))?;
                }
            }
        }
    }
    create_dir(dir)
}

/// Centre crop to `width x height` and conversion to `channels`.
fn fit_clean_image(image: &Image, width: usize, height: usize, channels: usize) -> Result<Image> {
    if image.width() < width || image.height() < height {
        return Err(Error::Validation(format!(
            "clean image {}x{} is smaller than {width}x{height}",
            image.width(),
            image.height()
        )));
    }
    let (x0, y0) = ((image.width() - width) / 2, (image.height() - height) / 2);
    let source = if channels == 1 && image.channels() == 3 {
        image.luminance()
    } else {
        image.clone()
    };
    Image::from_fn(width, height, channels, |x, y, c| {
        source.get(x0 + x, y0 + y, c.min(source.channels() - 1))
    })
}

fn clean_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for entry in io(dir, fs::read_dir(dir))? {
        let path = io(dir, entry)?.path();
        let is_png = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if is_png {
            paths.push(path);
        }
    }
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Validation(format!("{}: no PNG images", dir.display())));
    }
    Ok(paths)
}

pub fn simulate(cfg: SimulateConfig) -> Result<()> {
    let cfg = cfg.finish();
    let out = required(&cfg.out, "out")?;
    let (width, height) = parse_size(&cfg.size)?;
    if cfg.samples == 0 {
        return Err(Error::Usage("--samples must be >= 1".into()));
    }
    let shape = DatasetShape {
        width,
        height,
        channels: cfg.channels,
        n_frames: cfg.frames,
        frame_interval_us: cfg.frame_interval_us,
    };
    let (turbulence, events) = (cfg.turbulence(), cfg.events());
    turbulence.validate()?;
    events.validate()?;

    let samples: Vec<Sample> = match &cfg.clean_dir {
        None => simulate_procedural_dataset(cfg.samples, shape, &turbulence, &events, cfg.seed)?,
        Some(dir) => {
            let images = clean_images(dir)?
                .iter()
                .map(|p| fit_clean_image(&Image::load_png(p)?, width, height, cfg.channels))
                .collect::<Result<Vec<_>>>()?;
            (0..cfg.samples)
                .into_par_iter()
                .map(|i| {
                    simulate_sample(
                        &format!("{i:04}"),
                        &images[i % images.len()],
                        &turbulence,
                        &events,
                        shape.n_frames,
                        shape.frame_interval_us,
                        cfg.seed.wrapping_add(i as u64),
                    )
                })
                .collect::<Result<_>>()?
        }
    };

    prepare_output(out, cfg.force)?;
    samples
        .par_iter()
        .try_for_each(|s| save_sample(s, &out.join(sample_dir_name(&s.id))))?;
    let total_events: usize = samples.iter().map(|s| s.events.len()).sum();
    eprintln!("wrote {} samples to {}", samples.len(), out.display());
    report(
        "simulate",
        &cfg,
        Some(out),
        json!({ "samples": samples.len(), "events": total_events }),
    )
}

fn restore(
    sample: &Sample,
    method: Method,
    model: Option<&ModelParams>,
    window: usize,
    eps: f64,
) -> Result<Image> {
    match method {
        Method::Mean => Ok(sample.turbulent.temporal_mean()),
        Method::InverseVoxel => {
            let n = sample.turbulent.len();
            let voxel = voxelize(
                &sample.events,
                &VoxelConfig::for_frames(n, sample.events.duration_us())?,
            )?;
            lucky_fuse(&sample.turbulent, &inverse_voxel_weights(&voxel, n, window, eps)?)
        }
        Method::Egtm => {
            let model = model.ok_or_else(|| Error::Usage("--model is required for egtm".into()))?;
            egtm_restore(&sample.turbulent, &sample.events, model)
        }
    }
}

struct Scores {
    id: String,
    psnr: f64,
    ssim: f64,
}

fn score_all(
    dataset: &[Sample],
    method: Method,
    model: Option<&ModelParams>,
    window: usize,
    eps: f64,
    save_dir: Option<&Path>,
) -> Result<Vec<Scores>> {
    dataset
        .par_iter()
        .map(|s| {
            let image = restore(s, method, model, window, eps)?;
            if let Some(dir) = save_dir {
                image.save_png(&dir.join(format!("{}.png", s.id)))?;
            }
            Ok(Scores {
                id: s.id.clone(),
                psnr: psnr(&image, &s.gt)?,
                ssim: ssim(&image, &s.gt)?,
            })
        })
        .collect()
}

fn mean_of(scores: &[Scores]) -> (f64, f64) {
    let n = scores.len() as f64;
    (
        scores.iter().map(|s| s.psnr).sum::<f64>() / n,
        scores.iter().map(|s| s.ssim).sum::<f64>() / n,
    )
}

fn load_model(path: Option<&Path>, method: Method) -> Result<Option<ModelParams>> {
    match (method, path) {
        (Method::Egtm, Some(p)) => Ok(Some(ModelParams::load(p)?)),
        (Method::Egtm, None) => Err(Error::Usage("--model is required for --method egtm".into())),
        (_, Some(_)) => Err(Error::Usage("--model only applies to --method egtm".into())),
        (_, None) => Ok(None),
    }
}

pub fn fuse(cfg: FuseConfig) -> Result<()> {
    let data = required(&cfg.data, "data")?;
    let out = required(&cfg.out, "out")?;
    let method = cfg
        .method
        .ok_or_else(|| Error::Usage("--method is required".into()))?;
    let model = load_model(cfg.model.as_deref(), method)?;
    let dataset = load_dataset(data)?;
    create_dir(out)?;
    let scores = score_all(&dataset, method, model.as_ref(), cfg.window, cfg.eps, Some(out))?;

    let mut csv = String::from("sample_id,psnr,ssim\n");
    for s in &scores {
        let _ = writeln!(csv, "{},{:.4},{:.6}", s.id, s.psnr, s.ssim);
    }
    let (p, q) = mean_of(&scores);
    let _ = writeln!(csv, "mean,{p:.4},{q:.6}");
    write(&out.join("metrics.csv"), &csv)?;
    report(
        "fuse",
        &cfg,
        Some(out),
        json!({ "method": method.name(), "samples": scores.len(), "psnr": num(p), "ssim": q }),
    )
}

pub fn train(cfg: TrainRunConfig) -> Result<()> {
    let data = required(&cfg.data, "data")?;
    let out = required(&cfg.out, "out")?;
    let dataset = load_dataset(data)?;
    let outcome = run_training(&dataset, &cfg.train(), &cfg.loss(), |m| {
        eprintln!(
            "epoch {:>3}  loss {:.5}  val_psnr {:.3}  val_ssim {:.4}  lr {:.3e}",
            m.epoch, m.loss, m.val_psnr, m.val_ssim, m.lr
        );
    })?;
    create_dir(out)?;
    let model_path = out.join("model.egtm");
    outcome.params.save(&model_path)?;
    write(&out.join("metrics.csv"), &metrics_csv(&outcome.log))?;
    let last = outcome.log.last();
    report(
        "train",
        &cfg,
        Some(out),
        json!({
            "model": model_path,
            "epochs": outcome.log.len(),
            "params": outcome.params.param_count(),
            "final_loss": last.map(|m| num(m.loss)),
            "final_val_psnr": last.map(|m| num(m.val_psnr)),
        }),
    )
}

pub fn eval(cfg: EvalConfig) -> Result<()> {
    let data = required(&cfg.data, "data")?;
    let out = required(&cfg.out, "out")?;
    let dataset = load_dataset(data)?;
    let model = cfg.model.as_deref().map(ModelParams::load).transpose()?;
    let mut methods = vec![Method::Mean, Method::InverseVoxel];
    if model.is_some() {
        methods.push(Method::Egtm);
    }
    create_dir(out)?;
    let mut csv = String::from("method,sample_id,psnr,ssim\n");
    let mut summary = serde_json::Map::new();
    for method in methods {
        let scores = score_all(&dataset, method, model.as_ref(), cfg.window, cfg.eps, None)?;
        for s in &scores {
            let _ = writeln!(csv, "{},{},{:.4},{:.6}", method.name(), s.id, s.psnr, s.ssim);
        }
        let (p, q) = mean_of(&scores);
        let _ = writeln!(csv, "{},mean,{p:.4},{q:.6}", method.name());
        summary.insert(method.name().into(), json!({ "psnr": num(p), "ssim": q }));
    }
    write(&out.join("eval.csv"), &csv)?;
    report("eval", &cfg, Some(out), Value::Object(summary))
}

pub fn analyze(cfg: AnalyzeConfig) -> Result<()> {
    let data = required(&cfg.data, "data")?;
    let out = required(&cfg.out, "out")?;
    let dataset = load_dataset(data)?;
    let report_rows = correlation_study(&dataset, &cfg.correlation())?;
    create_dir(out)?;
    write(&out.join("correlation.csv"), &report_rows.to_csv())?;
    let rs: Vec<f64> = report_rows.rows.iter().map(|r| r.stats.r).collect();
    let min_r = rs.iter().copied().fold(f64::INFINITY, f64::min);
    let max_p = report_rows.rows.iter().map(|r| r.stats.p).fold(0.0, f64::max);
    report(
        "analyze",
        &cfg,
        Some(out),
        json!({ "rows": rs.len(), "min_r": min_r, "max_p": max_p }),
    )
}

pub fn params(cfg: ParamsConfig) -> Result<()> {
    let (width, height) = parse_size(&cfg.size)?;
    let net = NetConfig::for_frames(cfg.frames, cfg.channels);
    let cost = count_params_flops(net, height, width)?;
    report(
        "params",
        &cfg,
        None,
        json!({
            "bins": net.bins,
            "params": cost.params,
            "flops": cost.flops,
            "gflops": cost.flops as f64 / 1e9,
        }),
    )
}
