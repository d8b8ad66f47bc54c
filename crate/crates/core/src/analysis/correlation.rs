//! Event density versus turbulence error: Pearson statistics over randomly
//! sampled pixels, swept across spatial and temporal window sizes.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::data::Sample;
use crate::error::{Error, Result};
use crate::filter::window_bounds;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pearson {
    pub r: f64,
    /// Two-sided p-value of the t statistic with `n - 2` degrees of freedom.
    pub p: f64,
    pub n: usize,
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<Pearson> {
    if xs.len() != ys.len() {
        return Err(Error::shape(format!("{} xs vs {} ys", xs.len(), ys.len())));
    }
    let n = xs.len();
    if n < 3 {
        return Err(Error::validation(format!("pearson needs at least 3 points, got {n}")));
    }
    let nf = n as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / nf, ys.iter().sum::<f64>() / nf);
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(Error::Numeric("pearson correlation of a constant series".into()));
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let df = nf - 2.0;
    let p = if r.abs() == 1.0 {
        0.0
    } else {
        let t = r * (df / (1.0 - r * r)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Numeric(e.to_string()))?;
        (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0)
    };
    Ok(Pearson { r, p, n })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorrelationConfig {
    /// Upper bound on the samples used.
    pub n_samples: usize,
    pub pixels_per_sample: usize,
    /// Square window sides for the spatial sweep.
    pub spatial_sizes: Vec<usize>,
    /// Temporal window lengths for the single-pixel sweep.
    pub temporal_windows_ms: Vec<f64>,
    /// Fixed temporal span used during the spatial sweep.
    pub spatial_window_ms: f64,
    pub seed: u64,
}

impl Default for CorrelationConfig {
    fn default() -> Self {
        Self {
            n_samples: 100,
            pixels_per_sample: 500,
            spatial_sizes: (2..=10).collect(),
            temporal_windows_ms: vec![10.0, 20.0, 30.0, 40.0, 50.0],
            spatial_window_ms: 100.0,
            seed: 0,
        }
    }
}

impl CorrelationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 || self.pixels_per_sample == 0 {
            return Err(Error::validation("sample and pixel counts must be >= 1"));
        }
        if self.spatial_sizes.iter().any(|&s| s == 0) {
            return Err(Error::validation("spatial sizes must be >= 1"));
        }
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !self.temporal_windows_ms.iter().all(|&w| positive(w)) || !positive(self.spatial_window_ms) {
            return Err(Error::validation("temporal windows must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    Spatial,
    Temporal,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationRow {
    pub kind: WindowKind,
    /// Side length in pixels (spatial) or milliseconds (temporal).
    pub window: f64,
    pub stats: Pearson,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CorrelationReport {
    pub rows: Vec<CorrelationRow>,
}

impl CorrelationReport {
    pub const CSV_HEADER: &'static str = "kind,window,r,p,n";

    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::CSV_HEADER);
        for row in &self.rows {
            let kind = match row.kind {
                WindowKind::Spatial => "spatial",
                WindowKind::Temporal => "temporal",
            };
            let _ = writeln!(
                out,
                "{kind},{},{:.6},{:.6e},{}",
                row.window, row.stats.r, row.stats.p, row.stats.n
            );
        }
        out
    }
}

/// Per-pixel sorted event times.
struct EventIndex {
    width: usize,
    times: Vec<Vec<u64>>,
}

impl EventIndex {
    fn new(sample: &Sample) -> Self {
        let (w, h) = (sample.events.width() as usize, sample.events.height() as usize);
        let mut times = vec![Vec::new(); w * h];
        for e in sample.events.events() {
            times[e.y as usize * w + e.x as usize].push(e.t_us);
        }
        Self { width: w, times }
    }

    /// Events at `(x, y)` with `lo <= t <= hi`.
    fn count(&self, x: usize, y: usize, lo: u64, hi: u64) -> usize {
        let ts = &self.times[y * self.width + x];
        ts.partition_point(|&t| t <= hi) - ts.partition_point(|&t| t < lo)
    }
}

/// `[t - span/2, t + span/2]` clipped to the sequence.
fn time_window(center_us: u64, span_ms: f64, duration_us: u64) -> (u64, u64) {
    let half = (span_ms * 1000.0 / 2.0).round() as u64;
    (center_us.saturating_sub(half), (center_us + half).min(duration_us))
}

struct Observations {
    spatial: Vec<Vec<f64>>,
    temporal: Vec<Vec<f64>>,
    errors: Vec<f64>,
}

fn observe(sample: &Sample, index: usize, config: &CorrelationConfig) -> Observations {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index as u64);
    let events = EventIndex::new(sample);
    let (w, h) = (sample.gt.width(), sample.gt.height());
    let ch = sample.gt.channels();
    let stamps = sample.turbulent.timestamps();
    let duration = sample.events.duration_us();
    let mut obs = Observations {
        spatial: vec![Vec::new(); config.spatial_sizes.len()],
        temporal: vec![Vec::new(); config.temporal_windows_ms.len()],
        errors: Vec::with_capacity(config.pixels_per_sample),
    };
    for _ in 0..config.pixels_per_sample {
        let k = rng.random_range(0..sample.turbulent.len());
        let (x, y) = (rng.random_range(0..w), rng.random_range(0..h));
        let frame = &sample.turbulent.frames()[k];
        let err = (0..ch)
            .map(|c| (frame.get(x, y, c) - sample.gt.get(x, y, c)).abs())
            .sum::<f64>()
            / ch as f64;
        obs.errors.push(err);

        let (lo, hi) = time_window(stamps[k], config.spatial_window_ms, duration);
        for (slot, &size) in config.spatial_sizes.iter().enumerate() {
            let (x0, x1) = window_bounds(x, size, w);
            let (y0, y1) = window_bounds(y, size, h);
            let mut count = 0;
            for yy in y0..=y1 {
                for xx in x0..=x1 {
                    count += events.count(xx, yy, lo, hi);
                }
            }
            obs.spatial[slot].push(count as f64);
        }
        for (slot, &span) in config.temporal_windows_ms.iter().enumerate() {
            let (lo, hi) = time_window(stamps[k], span, duration);
            obs.temporal[slot].push(events.count(x, y, lo, hi) as f64);
        }
    }
    obs
}

/// Correlates local event counts with per-pixel frame error, pooled over samples.
pub fn correlation_study(dataset: &[Sample], config: &CorrelationConfig) -> Result<CorrelationReport> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::validation("correlation study needs at least one sample"));
    }
    let used = config.n_samples.min(dataset.len());
    let per_sample: Vec<Observations> = dataset[..used]
        .par_iter()
        .enumerate()
        .map(|(i, s)| observe(s, i, config))
        .collect();

    let errors: Vec<f64> = per_sample.iter().flat_map(|o| o.errors.iter().copied()).collect();
    let pooled = |pick: &dyn Fn(&Observations) -> &Vec<f64>| -> Vec<f64> {
        per_sample.iter().flat_map(|o| pick(o).iter().copied()).collect()
    };
    let mut report = CorrelationReport::default();
    for (slot, &size) in config.spatial_sizes.iter().enumerate() {
        let xs = pooled(&|o| &o.spatial[slot]);
        report.rows.push(CorrelationRow {
            kind: WindowKind::Spatial,
            window: size as f64,
            stats: pearson(&xs, &errors)?,
        });
    }
    for (slot, &span) in config.temporal_windows_ms.iter().enumerate() {
        let xs = pooled(&|o| &o.temporal[slot]);
        report.rows.push(CorrelationRow {
            kind: WindowKind::Temporal,
            window: span,
            stats: pearson(&xs, &errors)?,
        });
    }
    Ok(report)
}
