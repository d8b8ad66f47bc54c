//! Reference-level DVS model: each pixel keeps the log intensity at which it last
//! fired and emits one event per contrast threshold crossed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::turbulence::IntensityTrace;
use crate::data::{Event, EventStream, Image, Polarity};
use crate::error::{Error, Result};

/// Slack on the threshold comparison so that an exact multiple of `C` computed
/// through `ln` still counts as crossed.
const THRESHOLD_SLACK: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EventSimConfig {
    /// Log-intensity change per event.
    pub contrast_threshold: f64,
    pub log_eps: f64,
    /// Background events per pixel per second.
    pub noise_rate: f64,
    pub seed: u64,
}

impl Default for EventSimConfig {
    fn default() -> Self {
        Self {
            contrast_threshold: 0.2,
            log_eps: 1e-3,
            noise_rate: 0.5,
            seed: 0,
        }
    }
}

impl EventSimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.contrast_threshold > 0.0 && self.contrast_threshold.is_finite()) {
            return Err(Error::validation("contrast threshold must be positive"));
        }
        if !(self.log_eps > 0.0 && self.log_eps.is_finite()) {
            return Err(Error::validation("log eps must be positive"));
        }
        if !(self.noise_rate >= 0.0 && self.noise_rate.is_finite()) {
            return Err(Error::validation("noise rate must be >= 0"));
        }
        Ok(())
    }
}

pub fn simulate_trace_events(trace: &IntensityTrace, config: &EventSimConfig) -> Result<EventStream> {
    simulate_events(&trace.images, &trace.timestamps, trace.duration_us, config)
}

/// Events for the intensity sequence `trace` sampled at `timestamps`, covering
/// `[0, duration_us)`. Colour input is reduced to luminance first.
pub fn simulate_events(
    trace: &[Image],
    timestamps: &[u64],
    duration_us: u64,
    config: &EventSimConfig,
) -> Result<EventStream> {
    config.validate()?;
    if trace.len() != timestamps.len() {
        return Err(Error::shape(format!(
            "{} trace images but {} timestamps",
            trace.len(),
            timestamps.len()
        )));
    }
    if trace.len() < 2 {
        return Err(Error::validation("event simulation needs at least two trace steps"));
    }
    if timestamps.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::validation("trace timestamps must be strictly increasing"));
    }
    if *timestamps.last().unwrap() >= duration_us {
        return Err(Error::validation("trace extends past the stream duration"));
    }
    for img in &trace[1..] {
        trace[0].ensure_same_dims(img)?;
    }
    let (w, h) = (trace[0].width(), trace[0].height());
    let log_frames: Vec<Vec<f64>> = trace
        .iter()
        .map(|img| {
            img.luminance()
                .data()
                .iter()
                .map(|v| (v + config.log_eps).ln())
                .collect()
        })
        .collect();

    let rows: Vec<Vec<Event>> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut out = Vec::new();
            for x in 0..w {
                let series: Vec<f64> = log_frames.iter().map(|f| f[y * w + x]).collect();
                pixel_events(&series, timestamps, config.contrast_threshold, |t, p| {
                    out.push(Event::new(t, x as u32, y as u32, p))
                });
            }
            noise_events(y, w, duration_us, config, &mut out);
            out
        })
        .collect();

    let events = rows.into_iter().flatten().collect();
    EventStream::from_unsorted(events, duration_us, w as u32, h as u32)
}

/// Threshold crossings of a single pixel's log-intensity series.
pub(crate) fn pixel_events(
    series: &[f64],
    timestamps: &[u64],
    threshold: f64,
    mut emit: impl FnMut(u64, Polarity),
) {
    let mut reference = series[0];
    for j in 1..series.len() {
        let (prev, next) = (series[j - 1], series[j]);
        let delta = next - reference;
        let count = (delta.abs() / threshold + THRESHOLD_SLACK).floor();
        if count < 1.0 {
            continue;
        }
        let sign = delta.signum();
        let polarity = Polarity::from_sign(sign);
        let (t0, t1) = (timestamps[j - 1], timestamps[j]);
        let span = next - prev;
        for m in 1..=count as u64 {
            let level = reference + m as f64 * threshold * sign;
            let frac = if span != 0.0 {
                ((level - prev) / span).clamp(0.0, 1.0)
            } else {
                1.0
            };
            let t = t0 + (frac * (t1 - t0) as f64).round() as u64;
            emit(t.min(t1), polarity);
        }
        reference += count * threshold * sign;
    }
}

/// Homogeneous Poisson background activity for one sensor row.
fn noise_events(y: usize, width: usize, duration_us: u64, config: &EventSimConfig, out: &mut Vec<Event>) {
    if config.noise_rate == 0.0 {
        return;
    }
    let mean = config.noise_rate * duration_us as f64 * 1e-6;
    let poisson = Poisson::new(mean).expect("validated rate");
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x6e6f_6973_6576_656e);
    rng.set_stream(y as u64);
    for x in 0..width {
        let n = poisson.sample(&mut rng) as u64;
        for _ in 0..n {
            let t = rng.random_range(0..duration_us);
            let polarity = if rng.random_bool(0.5) {
                Polarity::On
            } else {
                Polarity::Off
            };
            out.push(Event::new(t, x as u32, y as u32, polarity));
        }
    }
}
