//! Per-pixel weighted temporal fusion and the weight sources that feed it.

use crate::data::{EventStream, FrameSequence, Image};
use crate::edem::{frame_density, voxelize, EventVoxel, VoxelConfig};
use crate::error::{Error, Result};
use crate::filter::box_mean;
use crate::net::{self, ModelParams, Tensor4};

pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-5;
/// Defaults for the inverse-density baseline.
pub const INVERSE_VOXEL_EPS: f64 = 1.0;
pub const INVERSE_VOXEL_WINDOW: usize = 5;

/// `N x H x W` non-negative weights summing to one over `N` at every pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightMap {
    frames: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl WeightMap {
    pub fn new(frames: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != frames * height * width || frames == 0 {
            return Err(Error::shape(format!(
                "weight map {frames}x{height}x{width} with {} values",
                data.len()
            )));
        }
        let plane = height * width;
        if let Some(v) = data.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::validation(format!("weight {v} is not a finite non-negative value")));
        }
        for p in 0..plane {
            let sum: f64 = (0..frames).map(|i| data[i * plane + p]).sum();
            if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
                return Err(Error::validation(format!(
                    "weights at pixel {p} sum to {sum}, not 1"
                )));
            }
        }
        Ok(Self {
            frames,
            height,
            width,
            data,
        })
    }

    pub fn uniform(frames: usize, height: usize, width: usize) -> Result<Self> {
        Self::new(frames, height, width, vec![1.0 / frames as f64; frames * height * width])
    }

    /// Weights of batch item `b` of a `[n, N, h, w]` tensor.
    pub fn from_tensor(t: &Tensor4, b: usize) -> Result<Self> {
        Self::new(t.c, t.h, t.w, t.item(b).to_vec())
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn frame(&self, i: usize) -> &[f64] {
        let plane = self.height * self.width;
        &self.data[i * plane..(i + 1) * plane]
    }

    #[inline]
    pub fn get(&self, i: usize, y: usize, x: usize) -> f64 {
        self.data[(i * self.height + y) * self.width + x]
    }
}

/// `sum_i W_i * I_i` with each weight plane shared by all colour channels.
pub fn lucky_fuse(frames: &FrameSequence, weights: &WeightMap) -> Result<Image> {
    if weights.frames != frames.len()
        || weights.height != frames.height()
        || weights.width != frames.width()
    {
        return Err(Error::shape(format!(
            "weights {}x{}x{} for {} frames of {}x{}",
            weights.frames,
            weights.height,
            weights.width,
            frames.len(),
            frames.height(),
            frames.width()
        )));
    }
    let ch = frames.channels();
    let plane = weights.height * weights.width;
    let mut out = vec![0.0; plane * ch];
    for (i, frame) in frames.frames().iter().enumerate() {
        let w = weights.frame(i);
        for (p, px) in frame.data().chunks_exact(ch).enumerate() {
            for c in 0..ch {
                out[p * ch + c] += w[p] * px[c];
            }
        }
    }
    Image::from_clamped(frames.width(), frames.height(), ch, out)
}

/// Non-learned weights: frame densities, box-smoothed over `window x window`,
/// mapped to `(d_i + eps)^-1` and normalized over frames.
pub fn inverse_voxel_weights(
    voxel: &EventVoxel,
    n_frames: usize,
    window: usize,
    eps: f64,
) -> Result<WeightMap> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::validation(format!("eps {eps} must be positive")));
    }
    let density = frame_density(voxel, n_frames)?;
    let (h, w) = (voxel.height(), voxel.width());
    let plane = h * w;
    let mut data = Vec::with_capacity(n_frames * plane);
    for i in 0..n_frames {
        let d: Vec<f64> = density.bin(i).iter().map(|&v| f64::from(v)).collect();
        data.extend(box_mean(&d, w, h, window).into_iter().map(|v| 1.0 / (v + eps)));
    }
    for p in 0..plane {
        let sum: f64 = (0..n_frames).map(|i| data[i * plane + p]).sum();
        for i in 0..n_frames {
            data[i * plane + p] /= sum;
        }
    }
    WeightMap::new(n_frames, h, w, data)
}

/// Restoration with the default inverse-density weights.
pub fn inverse_voxel_restore(frames: &FrameSequence, events: &EventStream) -> Result<Image> {
    let voxel = voxelize(events, &VoxelConfig::for_frames(frames.len(), events.duration_us())?)?;
    let weights =
        inverse_voxel_weights(&voxel, frames.len(), INVERSE_VOXEL_WINDOW, INVERSE_VOXEL_EPS)?;
    lucky_fuse(frames, &weights)
}

/// Full learned pipeline: voxelize, spatial and temporal guidance, fusion, refinement.
pub fn egtm_restore(frames: &FrameSequence, events: &EventStream, model: &ModelParams) -> Result<Image> {
    let config = model.config();
    if config.frames != frames.len() || config.channels != frames.channels() {
        return Err(Error::shape(format!(
            "model expects {} frames x {} channels, got {} x {}",
            config.frames,
            config.channels,
            frames.len(),
            frames.channels()
        )));
    }
    let voxel = voxelize(events, &VoxelConfig::new(config.bins, events.duration_us())?)?;
    let (out, _) = net::forward(
        model,
        &Tensor4::from_voxel(&voxel),
        &Tensor4::from_frames(frames.frames())?,
    )?;
    out.output.to_image(0)
}
