use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, AdamState};
use super::loss::{loss_tensor, LossConfig};
use super::schedule::cosine_lr;
use crate::analysis::{psnr, ssim};
use crate::data::Sample;
use crate::edem::{voxelize, VoxelConfig};
use crate::error::{Error, Result};
use crate::net::{self, ModelParams, NetConfig, Tensor4};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr0: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Reduce per-sample gradients in a fixed order.
    pub deterministic: bool,
    /// Share of samples (by sorted id) held out for validation in [`train`].
    pub val_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr0: 5e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            epochs: 20,
            batch_size: 8,
            seed: 0,
            deterministic: false,
            val_fraction: 0.2,
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.adam_eps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr0 >= 0.0 && self.lr0.is_finite()) {
            return Err(Error::validation(format!("lr0 {} must be >= 0", self.lr0)));
        }
        if self.batch_size == 0 {
            return Err(Error::validation("batch size must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(Error::validation(format!(
                "val_fraction {} must lie in [0, 1)",
                self.val_fraction
            )));
        }
        self.adam().validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Mean mini-batch loss over the epoch.
    pub loss: f64,
    /// Mean validation PSNR and SSIM; NaN without a validation set.
    pub val_psnr: f64,
    pub val_ssim: f64,
    /// Learning rate of the epoch's last step.
    pub lr: f64,
}

pub const METRICS_CSV_HEADER: &str = "epoch,loss,val_psnr,val_ssim,lr";

pub fn metrics_csv(log: &[EpochMetrics]) -> String {
    let mut out = format!("{METRICS_CSV_HEADER}\n");
    for m in log {
        let _ = writeln!(
            out,
            "{},{:.8},{:.6},{:.6},{:.8e}",
            m.epoch, m.loss, m.val_psnr, m.val_ssim, m.lr
        );
    }
    out
}

pub struct TrainOutcome {
    pub params: ModelParams,
    pub log: Vec<EpochMetrics>,
}

/// Network-ready tensors of one sample.
struct Prepared {
    voxel: Tensor4,
    frames: Tensor4,
    gt: Tensor4,
}

fn net_config_for(samples: &[&Sample]) -> Result<NetConfig> {
    let first = samples
        .first()
        .ok_or_else(|| Error::validation("training needs at least one sample"))?;
    let dims = |s: &Sample| (s.gt.width(), s.gt.height(), s.gt.channels(), s.turbulent.len());
    for s in samples {
        if dims(s) != dims(first) {
            return Err(Error::shape(format!(
                "sample {} is {:?}, sample {} is {:?} (width, height, channels, frames)",
                s.id,
                dims(s),
                first.id,
                dims(first)
            )));
        }
    }
    let config = NetConfig::for_frames(first.turbulent.len(), first.gt.channels());
    config.validate()?;
    Ok(config)
}

fn prepare(sample: &Sample, config: NetConfig) -> Result<Prepared> {
    let voxel = voxelize(&sample.events, &VoxelConfig::new(config.bins, sample.events.duration_us())?)?;
    Ok(Prepared {
        voxel: Tensor4::from_voxel(&voxel),
        frames: Tensor4::from_frames(sample.turbulent.frames())?,
        gt: Tensor4::from_image(&sample.gt),
    })
}

/// Loss and parameter gradient for one sample.
fn sample_gradient(
    params: &ModelParams,
    item: &Prepared,
    loss_cfg: &LossConfig,
) -> Result<(f64, ModelParams)> {
    let (out, tape) = net::forward(params, &item.voxel, &item.frames)?;
    let loss = loss_tensor(&out.output, &item.gt, loss_cfg)?;
    Ok((loss.value, tape.backward(params, &loss.grad)?.params))
}

fn sum_into(acc: &mut (f64, ModelParams), item: (f64, ModelParams)) -> Result<()> {
    acc.0 += item.0;
    acc.1.add_scaled(&item.1, 1.0)
}

fn batch_gradient(
    params: &ModelParams,
    batch: &[&Prepared],
    loss_cfg: &LossConfig,
    deterministic: bool,
) -> Result<(f64, ModelParams)> {
    let zero = || (0.0, params.zeros_like());
    let total = if deterministic {
        let items: Vec<(f64, ModelParams)> = batch
            .par_iter()
            .map(|item| sample_gradient(params, item, loss_cfg))
            .collect::<Result<_>>()?;
        let mut acc = zero();
        for item in items {
            sum_into(&mut acc, item)?;
        }
        acc
    } else {
        batch
            .par_iter()
            .map(|item| sample_gradient(params, item, loss_cfg))
            .try_reduce(zero, |mut a, b| {
                sum_into(&mut a, b)?;
                Ok(a)
            })?
    };
    let scale = 1.0 / batch.len() as f64;
    let mut grads = params.zeros_like();
    grads.add_scaled(&total.1, scale)?;
    Ok((total.0 * scale, grads))
}

fn validation_scores(params: &ModelParams, val: &[Prepared], samples: &[&Sample]) -> Result<(f64, f64)> {
    if val.is_empty() {
        return Ok((f64::NAN, f64::NAN));
    }
    let scores: Vec<(f64, f64)> = val
        .par_iter()
        .zip(samples)
        .map(|(item, sample)| {
            let (out, _) = net::forward(params, &item.voxel, &item.frames)?;
            let image = out.output.to_image(0)?;
            Ok((psnr(&image, &sample.gt)?, ssim(&image, &sample.gt)?))
        })
        .collect::<Result<_>>()?;
    let n = scores.len() as f64;
    Ok((
        scores.iter().map(|s| s.0).sum::<f64>() / n,
        scores.iter().map(|s| s.1).sum::<f64>() / n,
    ))
}

/// Splits by sorted id: the last `ceil(val_fraction * n)` samples validate,
/// always leaving at least one for training.
pub fn split_dataset(dataset: &[Sample], val_fraction: f64) -> (Vec<&Sample>, Vec<&Sample>) {
    let mut sorted: Vec<&Sample> = dataset.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let n_val = ((val_fraction * sorted.len() as f64).ceil() as usize).min(sorted.len().saturating_sub(1));
    let val = sorted.split_off(sorted.len() - n_val);
    (sorted, val)
}

/// Trains on `dataset` minus a held-out validation share.
pub fn train(
    dataset: &[Sample],
    train_cfg: &TrainConfig,
    loss_cfg: &LossConfig,
    on_epoch: impl FnMut(&EpochMetrics),
) -> Result<TrainOutcome> {
    train_cfg.validate()?;
    let (train_set, val_set) = split_dataset(dataset, train_cfg.val_fraction);
    train_with_validation(&train_set, &val_set, train_cfg, loss_cfg, on_epoch)
}

/// Mini-batch Adam with cosine annealing; validation scores are logged only.
pub fn train_with_validation(
    train_set: &[&Sample],
    val_set: &[&Sample],
    train_cfg: &TrainConfig,
    loss_cfg: &LossConfig,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<TrainOutcome> {
    train_cfg.validate()?;
    loss_cfg.validate()?;
    let all: Vec<&Sample> = train_set.iter().chain(val_set).copied().collect();
    let net_cfg = net_config_for(train_set)?;
    if net_config_for(&all)? != net_cfg {
        return Err(Error::shape("validation samples differ from training samples"));
    }
    let mut params = ModelParams::init(net_cfg, train_cfg.seed)?;
    params.round_to_f32();
    if train_cfg.epochs == 0 {
        return Ok(TrainOutcome { params, log: Vec::new() });
    }

    let train_data: Vec<Prepared> = train_set
        .par_iter()
        .map(|s| prepare(s, net_cfg))
        .collect::<Result<_>>()?;
    let val_data: Vec<Prepared> = val_set
        .par_iter()
        .map(|s| prepare(s, net_cfg))
        .collect::<Result<_>>()?;

    let adam = train_cfg.adam();
    let mut state = AdamState::new(&params);
    let batches_per_epoch = train_data.len().div_ceil(train_cfg.batch_size);
    let total_steps = (train_cfg.epochs * batches_per_epoch) as u64;
    let mut step = 0u64;
    let mut order: Vec<usize> = (0..train_data.len()).collect();
    let mut log = Vec::with_capacity(train_cfg.epochs);

    for epoch in 0..train_cfg.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(train_cfg.seed);
        rng.set_stream(epoch as u64 + 1);
        order.sort_unstable();
        order.shuffle(&mut rng);

        let mut loss_sum = 0.0;
        let mut lr = 0.0;
        for chunk in order.chunks(train_cfg.batch_size) {
            let batch: Vec<&Prepared> = chunk.iter().map(|&i| &train_data[i]).collect();
            let (loss, grads) = batch_gradient(&params, &batch, loss_cfg, train_cfg.deterministic)?;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!("loss became {loss} at step {step}")));
            }
            lr = cosine_lr(step, total_steps, train_cfg.lr0);
            step += 1;
            adam_step(&mut params, &grads, &mut state, step, lr, &adam)?;
            loss_sum += loss;
        }
        let (val_psnr, val_ssim) = validation_scores(&params, &val_data, val_set)?;
        let metrics = EpochMetrics {
            epoch: epoch + 1,
            loss: loss_sum / batches_per_epoch as f64,
            val_psnr,
            val_ssim,
            lr,
        };
        on_epoch(&metrics);
        log.push(metrics);
    }
    params.round_to_f32();
    Ok(TrainOutcome { params, log })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{procedural_scene, simulate_sample, EventSimConfig, TurbulenceConfig};

    fn dataset(n: usize, size: usize) -> Vec<Sample> {
        (0..n)
            .map(|i| {
                let gt = procedural_scene(size, size, 1, 10 + i as u64, i as u64).unwrap();
                simulate_sample(
                    &format!("{i:03}"),
                    &gt,
                    &TurbulenceConfig::default(),
                    &EventSimConfig::default(),
                    3,
                    10_000,
                    100 + i as u64,
                )
                .unwrap()
            })
            .collect()
    }

    fn quick(epochs: usize, lr0: f64) -> TrainConfig {
        TrainConfig {
            lr0,
            epochs,
            batch_size: 2,
            seed: 9,
            deterministic: true,
            val_fraction: 0.25,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_learning_rate_keeps_initial_params() {
        let data = dataset(1, 12);
        let cfg = TrainConfig {
            val_fraction: 0.0,
            ..quick(1, 0.0)
        };
        let out = train(&data, &cfg, &LossConfig::default(), |_| {}).unwrap();
        let init = train(&data, &TrainConfig { epochs: 0, ..cfg }, &LossConfig::default(), |_| {}).unwrap();
        assert_eq!(out.params, init.params);
        assert_eq!(out.log.len(), 1);
        assert!(out.log[0].val_psnr.is_nan());
        assert!(init.log.is_empty());
    }

    #[test]
    fn seeded_runs_are_identical() {
        let data = dataset(4, 12);
        let a = train(&data, &quick(2, 5e-3), &LossConfig::default(), |_| {}).unwrap();
        let b = train(&data, &quick(2, 5e-3), &LossConfig::default(), |_| {}).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(metrics_csv(&a.log), metrics_csv(&b.log));
        assert_eq!(a.log[1].lr, cosine_lr(3, 4, 5e-3));
    }

    #[test]
    fn split_is_by_sorted_id() {
        let mut data = dataset(5, 8);
        data.reverse();
        let (train_set, val_set) = split_dataset(&data, 0.2);
        let ids: Vec<&str> = train_set.iter().map(|s| s.id.as_str()).collect();
        assert_eq!(ids, ["000", "001", "002", "003"]);
        assert_eq!(val_set[0].id, "004");
        let (t, v) = split_dataset(&data[..1], 0.5);
        assert_eq!((t.len(), v.len()), (1, 0));
    }

    #[test]
    fn rejects_empty_and_mixed_datasets() {
        assert!(train(&[], &quick(1, 1e-3), &LossConfig::default(), |_| {}).is_err());
        let mut data = dataset(2, 12);
        let other = dataset(1, 16).remove(0);
        data.push(Sample { id: "zzz".into(), ..other });
        assert!(train(&data, &quick(1, 1e-3), &LossConfig::default(), |_| {}).is_err());
    }

    #[test]
    fn csv_has_one_row_per_epoch() {
        let log = vec![EpochMetrics {
            epoch: 1,
            loss: 0.5,
            val_psnr: 20.0,
            val_ssim: 0.5,
            lr: 5e-3,
        }];
        let csv = metrics_csv(&log);
        assert_eq!(csv.lines().count(), 2);
        assert!(csv.starts_with(METRICS_CSV_HEADER));
    }
}
