use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::Conv2d;
use crate::error::{Error, Result};

pub const MODEL_MAGIC: &[u8; 4] = b"EGTM";
pub const MODEL_VERSION: u16 = 1;
/// Hidden width of the detail refinement block.
pub const DEB_WIDTH: usize = 16;

pub const SGEB_LAYERS: std::ops::Range<usize> = 0..6;
pub const TGEB_LAYERS: std::ops::Range<usize> = 6..9;
pub const DEB_LAYERS: std::ops::Range<usize> = 9..12;
pub const LAYER_COUNT: usize = 12;

const LAYER_NAMES: [&str; LAYER_COUNT] = [
    "sgeb.dw1", "sgeb.pw1", "sgeb.dw2", "sgeb.pw2", "sgeb.dw3", "sgeb.pw3", "tgeb.c1", "tgeb.c2",
    "tgeb.c3", "deb.c1", "deb.c2", "deb.c3",
];

/// Shape parameters: voxel bins `B`, frames `N`, image channels `C`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetConfig {
    pub bins: usize,
    pub frames: usize,
    pub channels: usize,
}

impl NetConfig {
    /// `B = 4N`.
    pub fn for_frames(frames: usize, channels: usize) -> Self {
        Self {
            bins: 4 * frames,
            frames,
            channels,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.bins == 0 || self.bins % 4 != 0 {
            return Err(Error::validation(format!("bins {} must be a positive multiple of 4", self.bins)));
        }
        if self.frames < 2 {
            return Err(Error::validation(format!("need at least 2 frames, got {}", self.frames)));
        }
        if self.channels != 1 && self.channels != 3 {
            return Err(Error::validation(format!("unsupported channel count {}", self.channels)));
        }
        Ok(())
    }

    /// Every convolution in execution order.
    pub fn layers(&self) -> [Conv2d; LAYER_COUNT] {
        let (b, n, c) = (self.bins, self.frames, self.channels);
        [
            Conv2d::depthwise(b, 3),
            Conv2d::pointwise(b, b),
            Conv2d::depthwise(b, 3),
            Conv2d::pointwise(b, b),
            Conv2d::depthwise(b, 3),
            Conv2d::pointwise(b, b),
            Conv2d::pointwise(b, b / 2),
            Conv2d::pointwise(b / 2, b / 4),
            Conv2d::pointwise(b / 4, n),
            Conv2d::new(c, DEB_WIDTH, 3, 1),
            Conv2d::new(DEB_WIDTH, DEB_WIDTH, 3, 1),
            Conv2d::new(DEB_WIDTH, c, 3, 1),
        ]
    }

    pub fn layer_names() -> &'static [&'static str; LAYER_COUNT] {
        &LAYER_NAMES
    }
}

/// Weights and biases of every layer, indexed like [`NetConfig::layers`].
///
/// The same structure doubles as a gradient buffer and as optimizer moment storage.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    config: NetConfig,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl ModelParams {
    pub fn zeros(config: NetConfig) -> Result<Self> {
        config.validate()?;
        let layers = config.layers();
        Ok(Self {
            config,
            weights: layers.iter().map(|l| vec![0.0; l.weight_len()]).collect(),
            biases: layers.iter().map(|l| vec![0.0; l.out_channels]).collect(),
        })
    }

    /// Kaiming-uniform weights (`U(-b, b)`, `b = sqrt(6 / fan_in)`), zero biases and a
    /// zeroed last refinement layer so the untrained output is the fused image.
    pub fn init(config: NetConfig, seed: u64) -> Result<Self> {
        let mut params = Self::zeros(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (i, layer) in config.layers().iter().enumerate() {
            if i == DEB_LAYERS.end - 1 {
                continue;
            }
            let bound = (6.0 / layer.fan_in() as f64).sqrt();
            for w in &mut params.weights[i] {
                *w = rng.random_range(-bound..bound);
            }
        }
        Ok(params)
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.config).expect("config already validated")
    }

    pub fn config(&self) -> NetConfig {
        self.config
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().chain(&self.biases).map(Vec::len).sum()
    }

    /// `(name, dims, values)` in file order: each layer's weight then bias.
    pub fn named_tensors(&self) -> Vec<(String, Vec<usize>, &[f64])> {
        let layers = self.config.layers();
        let mut out = Vec::with_capacity(2 * LAYER_COUNT);
        for (i, layer) in layers.iter().enumerate() {
            out.push((
                format!("{}.weight", LAYER_NAMES[i]),
                layer.weight_dims().to_vec(),
                self.weights[i].as_slice(),
            ));
            out.push((
                format!("{}.bias", LAYER_NAMES[i]),
                vec![layer.out_channels],
                self.biases[i].as_slice(),
            ));
        }
        out
    }

    pub fn tensor(&self, name: &str) -> Option<&[f64]> {
        let (layer, kind) = name.rsplit_once('.')?;
        let i = LAYER_NAMES.iter().position(|n| *n == layer)?;
        match kind {
            "weight" => Some(&self.weights[i]),
            "bias" => Some(&self.biases[i]),
            _ => None,
        }
    }

    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut Vec<f64>> {
        let (layer, kind) = name.rsplit_once('.')?;
        let i = LAYER_NAMES.iter().position(|n| *n == layer)?;
        match kind {
            "weight" => Some(&mut self.weights[i]),
            "bias" => Some(&mut self.biases[i]),
            _ => None,
        }
    }

    /// Every parameter buffer, weights then biases per layer.
    pub fn buffers(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.weights.iter().zip(&self.biases).flat_map(|(w, b)| [w, b])
    }

    pub fn buffers_mut(&mut self) -> impl Iterator<Item = &mut Vec<f64>> {
        self.weights
            .iter_mut()
            .zip(self.biases.iter_mut())
            .flat_map(|(w, b)| [w, b])
    }

    pub fn ensure_compatible(&self, other: &ModelParams) -> Result<()> {
        if self.config != other.config {
            return Err(Error::shape(format!(
                "parameter sets differ: {:?} vs {:?}",
                self.config, other.config
            )));
        }
        Ok(())
    }

    /// `self += scale * other`
    pub fn add_scaled(&mut self, other: &ModelParams, scale: f64) -> Result<()> {
        self.ensure_compatible(other)?;
        for (a, b) in self.buffers_mut().zip(other.buffers()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += scale * y;
            }
        }
        Ok(())
    }

    /// Rounds every value to `f32`, matching what a save/load cycle yields.
    pub fn round_to_f32(&mut self) {
        for buf in self.buffers_mut() {
            for v in buf.iter_mut() {
                *v = f64::from(*v as f32);
            }
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let tensors = self.named_tensors();
        let mut out = Vec::new();
        out.extend_from_slice(MODEL_MAGIC);
        out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
        out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
        for (name, dims, values) in tensors {
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(dims.len() as u8);
            for d in dims {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for v in values {
                out.extend_from_slice(&(*v as f32).to_le_bytes());
            }
        }
        out
    }

    /// Parses a model file; `B`, `N` and `C` are recovered from the tensor shapes.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MODEL_MAGIC {
            return Err(Error::validation("not an EGTM model file"));
        }
        let version = r.u16()?;
        if version != MODEL_VERSION {
            return Err(Error::validation(format!("unsupported model version {version}")));
        }
        let count = r.u32()? as usize;
        let mut found: Vec<(String, Vec<usize>, Vec<f64>)> = Vec::with_capacity(count.min(64));
        for _ in 0..count {
            let len = r.u16()? as usize;
            let name = std::str::from_utf8(r.take(len)?)
                .map_err(|_| Error::validation("tensor name is not UTF-8"))?
                .to_owned();
            let ndim = r.take(1)?[0] as usize;
            let dims = (0..ndim)
                .map(|_| r.u32().map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let numel = dims
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .ok_or_else(|| Error::validation("tensor size overflow"))?;
            let raw = r.take(numel.checked_mul(4).ok_or_else(|| Error::validation("tensor size overflow"))?)?;
            let values = raw
                .chunks_exact(4)
                .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
                .collect();
            found.push((name, dims, values));
        }
        if r.pos != bytes.len() {
            return Err(Error::validation("trailing bytes after model tensors"));
        }

        let dims_of = |name: &str| -> Result<&Vec<usize>> {
            found
                .iter()
                .find(|t| t.0 == name)
                .map(|t| &t.1)
                .ok_or_else(|| Error::validation(format!("model file lacks {name}")))
        };
        let bins = dims_of("sgeb.dw1.weight")?[0];
        let frames = dims_of("tgeb.c3.weight")?[0];
        let channels = dims_of("deb.c1.weight")?.get(1).copied().unwrap_or(0);
        let mut params = Self::zeros(NetConfig {
            bins,
            frames,
            channels,
        })?;
        let expected = params
            .named_tensors()
            .into_iter()
            .map(|(n, d, _)| (n, d))
            .collect::<Vec<_>>();
        if found.len() != expected.len() {
            return Err(Error::validation(format!(
                "model has {} tensors, expected {}",
                found.len(),
                expected.len()
            )));
        }
        for (name, dims) in expected {
            let (_, got_dims, values) = found
                .iter()
                .find(|t| t.0 == name)
                .ok_or_else(|| Error::validation(format!("model file lacks {name}")))?;
            if *got_dims != dims {
                return Err(Error::validation(format!("{name}: dims {got_dims:?}, expected {dims:?}")));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::validation(format!("{name}: non-finite value")));
            }
            params.tensor_mut(&name).expect("known name").clone_from(values);
        }
        Ok(params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| Error::validation(format!("{}: {e}", path.display())))
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::validation("model file truncated"))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}
