//! Turbulence degradation: smooth random tilt fields evolving as an AR(1)
//! process with a log-normal strength per frame interval, backward warping,
//! and a fixed Gaussian blur.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{clamp01, FrameSequence, Image};
use crate::error::{Error, Result};
use crate::filter::{gaussian_kernel, separable_filter};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TurbulenceConfig {
    /// RMS displacement magnitude in pixels.
    pub tilt_sigma: f64,
    /// Gaussian smoothing length of the tilt noise, pixels.
    pub correlation_length: f64,
    /// AR(1) coefficient between consecutive sub-steps.
    pub temporal_correlation: f64,
    pub blur_sigma: f64,
    /// Rendered sub-steps per frame interval.
    pub supersample: usize,
    /// Standard deviation of the log strength gain drawn per frame interval.
    /// The gain varies smoothly over the image and only redistributes strength:
    /// every field is rescaled to RMS `tilt_sigma`.
    pub intermittency: f64,
    pub seed: u64,
}

impl Default for TurbulenceConfig {
    fn default() -> Self {
        Self {
            tilt_sigma: 1.5,
            correlation_length: 8.0,
            temporal_correlation: 0.7,
            blur_sigma: 0.8,
            supersample: 4,
            intermittency: 1.0,
            seed: 0,
        }
    }
}

impl TurbulenceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tilt_sigma >= 0.0 && self.tilt_sigma.is_finite()) {
            return Err(Error::validation(format!("tilt sigma {} must be >= 0", self.tilt_sigma)));
        }
        if !(self.correlation_length >= 1.0 && self.correlation_length.is_finite()) {
            return Err(Error::validation(format!(
                "correlation length {} must be >= 1",
                self.correlation_length
            )));
        }
        if !(0.0..1.0).contains(&self.temporal_correlation) {
            return Err(Error::validation(format!(
                "temporal correlation {} must lie in [0, 1)",
                self.temporal_correlation
            )));
        }
        if !(self.blur_sigma >= 0.0 && self.blur_sigma.is_finite()) {
            return Err(Error::validation(format!("blur sigma {} must be >= 0", self.blur_sigma)));
        }
        if self.supersample == 0 {
            return Err(Error::validation("supersample must be >= 1"));
        }
        if !(self.intermittency >= 0.0 && self.intermittency.is_finite()) {
            return Err(Error::validation(format!(
                "intermittency {} must be >= 0",
                self.intermittency
            )));
        }
        Ok(())
    }
}

/// Per-pixel backward displacement `(u, v)` in pixels.
#[derive(Clone, Debug, PartialEq)]
pub struct TiltField {
    pub width: usize,
    pub height: usize,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl TiltField {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self::constant(width, height, 0.0, 0.0)
    }

    pub fn constant(width: usize, height: usize, u: f64, v: f64) -> Self {
        Self {
            width,
            height,
            u: vec![u; width * height],
            v: vec![v; width * height],
        }
    }

    /// `sqrt(mean(u^2 + v^2))`
    pub fn rms(&self) -> f64 {
        let sum: f64 = self.u.iter().zip(&self.v).map(|(u, v)| u * u + v * v).sum();
        (sum / self.u.len() as f64).sqrt()
    }
}

/// Smoothed white noise rescaled to unit RMS magnitude, drawn from sub-stream `step`.
fn smoothed_noise(width: usize, height: usize, length: f64, seed: u64, step: u64) -> TiltField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(step);
    let n = width * height;
    let mut draw = || -> Vec<f64> { (0..n).map(|_| StandardNormal.sample(&mut rng)).collect() };
    let (u, v) = (draw(), draw());
    let kernel = gaussian_kernel(length);
    let mut field = TiltField {
        width,
        height,
        u: separable_filter(&u, width, height, &kernel),
        v: separable_filter(&v, width, height, &kernel),
    };
    let rms = field.rms();
    if rms > 0.0 {
        field.u.iter_mut().chain(field.v.iter_mut()).for_each(|x| *x /= rms);
    }
    field
}

/// `n_steps` fields with `F_0 = G_0`, `F_{k+1} = rho F_k + sqrt(1 - rho^2) G_{k+1}`,
/// scaled to `tilt_sigma`. Each `G_k` comes from its own RNG stream, so the result
/// does not depend on the thread count.
pub fn generate_tilt_fields(
    config: &TurbulenceConfig,
    width: usize,
    height: usize,
    n_steps: usize,
) -> Result<Vec<TiltField>> {
    config.validate()?;
    if n_steps == 0 {
        return Err(Error::validation("need at least one tilt step"));
    }
    if config.tilt_sigma == 0.0 {
        return Ok(vec![TiltField::zeros(width, height); n_steps]);
    }
    let fresh: Vec<TiltField> = (0..n_steps as u64)
        .into_par_iter()
        .map(|k| smoothed_noise(width, height, config.correlation_length, config.seed, k))
        .collect();

    let rho = config.temporal_correlation;
    let innovation = (1.0 - rho * rho).sqrt();
    let mut fields: Vec<TiltField> = Vec::with_capacity(n_steps);
    for g in fresh {
        let next = match fields.last() {
            None => g,
            Some(prev) => TiltField {
                width,
                height,
                u: prev.u.iter().zip(&g.u).map(|(p, g)| rho * p + innovation * g).collect(),
                v: prev.v.iter().zip(&g.v).map(|(p, g)| rho * p + innovation * g).collect(),
            },
        };
        fields.push(next);
    }
    let gains: Vec<Vec<f64>> = (0..n_steps.div_ceil(config.supersample) as u64)
        .into_par_iter()
        .map(|i| strength_gain(config, width, height, i))
        .collect();
    for (k, f) in fields.iter_mut().enumerate() {
        let gain = &gains[k / config.supersample];
        for (p, g) in gain.iter().enumerate() {
            f.u[p] *= g;
            f.v[p] *= g;
        }
        let rms = f.rms();
        let scale = if rms > 0.0 { config.tilt_sigma / rms } else { 0.0 };
        f.u.iter_mut().chain(f.v.iter_mut()).for_each(|x| *x *= scale);
    }
    Ok(fields)
}

/// Smooth log-normal gain for frame interval `interval`, normalized to unit
/// mean square.
fn strength_gain(config: &TurbulenceConfig, width: usize, height: usize, interval: u64) -> Vec<f64> {
    if config.intermittency == 0.0 {
        return vec![1.0; width * height];
    }
    let noise = smoothed_noise(
        width,
        height,
        config.correlation_length,
        config.seed,
        GAIN_STREAM_OFFSET + interval,
    );
    // u alone has unit RMS up to a factor sqrt(2)
    let mut gain: Vec<f64> = noise
        .u
        .iter()
        .map(|z| (config.intermittency * z * std::f64::consts::SQRT_2).exp())
        .collect();
    let ms = gain.iter().map(|g| g * g).sum::<f64>() / gain.len() as f64;
    let scale = ms.sqrt();
    gain.iter_mut().for_each(|g| *g /= scale);
    gain
}

const GAIN_STREAM_OFFSET: u64 = 1 << 40;

/// Backward warp, `out(x, y) = in(x - u, y - v)`, bilinear with clamped borders.
pub fn warp(image: &Image, field: &TiltField) -> Result<Image> {
    let (w, h, ch) = (image.width(), image.height(), image.channels());
    if field.width != w || field.height != h {
        return Err(Error::shape(format!(
            "tilt field {}x{} vs image {w}x{h}",
            field.width, field.height
        )));
    }
    let src = image.data();
    let mut out = Vec::with_capacity(src.len());
    let (max_x, max_y) = ((w - 1) as f64, (h - 1) as f64);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let sx = (x as f64 - field.u[i]).clamp(0.0, max_x);
            let sy = (y as f64 - field.v[i]).clamp(0.0, max_y);
            let (x0, y0) = (sx.floor() as usize, sy.floor() as usize);
            let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
            let (fx, fy) = (sx - x0 as f64, sy - y0 as f64);
            for c in 0..ch {
                let at = |xx: usize, yy: usize| src[(yy * w + xx) * ch + c];
                let top = at(x0, y0) * (1.0 - fx) + at(x1, y0) * fx;
                let bottom = at(x0, y1) * (1.0 - fx) + at(x1, y1) * fx;
                out.push(clamp01(top * (1.0 - fy) + bottom * fy));
            }
        }
    }
    Image::new(w, h, ch, out)
}

/// Gaussian blur with radius `ceil(3 sigma)`, normalized kernel and reflect padding.
pub fn blur(image: &Image, sigma: f64) -> Result<Image> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::validation(format!("blur sigma {sigma} must be >= 0")));
    }
    if sigma == 0.0 {
        return Ok(image.clone());
    }
    let kernel = gaussian_kernel(sigma);
    let (w, h) = (image.width(), image.height());
    let planes: Vec<Vec<f64>> = (0..image.channels())
        .map(|c| separable_filter(&image.plane(c), w, h, &kernel))
        .collect();
    Image::from_planes(w, h, &planes)
}

/// Every rendered sub-step, kept for event simulation.
#[derive(Clone, Debug, PartialEq)]
pub struct IntensityTrace {
    pub images: Vec<Image>,
    /// Sub-step `j` sits at `j * frame_interval / supersample` microseconds.
    pub timestamps: Vec<u64>,
    /// Span of the whole sequence, `n_frames * frame_interval`.
    pub duration_us: u64,
}

impl IntensityTrace {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }
}

/// Renders `n_frames * supersample` warped-then-blurred copies of `gt`; the frames
/// are every `supersample`-th of them.
pub fn render_sequence(
    gt: &Image,
    config: &TurbulenceConfig,
    n_frames: usize,
    frame_interval_us: u64,
) -> Result<(FrameSequence, IntensityTrace)> {
    config.validate()?;
    let k = config.supersample;
    if frame_interval_us < k as u64 {
        return Err(Error::validation(format!(
            "frame interval {frame_interval_us} us too short for {k} sub-steps"
        )));
    }
    let steps = n_frames * k;
    let fields = generate_tilt_fields(config, gt.width(), gt.height(), steps)?;
    let images = fields
        .par_iter()
        .map(|f| blur(&warp(gt, f)?, config.blur_sigma))
        .collect::<Result<Vec<_>>>()?;
    let timestamps = (0..steps as u64)
        .map(|j| j * frame_interval_us / k as u64)
        .collect();
    let frames = images.iter().step_by(k).cloned().collect();
    let sequence = FrameSequence::new(frames, frame_interval_us)?;
    let trace = IntensityTrace {
        images,
        timestamps,
        duration_us: sequence.duration_us(),
    };
    Ok((sequence, trace))
}
