//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Runs without the libtest harness so the summary lines always reach the
//! console. `ACCEPTANCE_ONLY=3,7` restricts the run to selected criteria.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use turblucky::analysis::{correlation_study, psnr, ssim, CorrelationConfig, WindowKind};
use turblucky::data::{Event, EventStream, FrameSequence, Image, Polarity, Sample};
use turblucky::edem::{voxelize, VoxelConfig};
use turblucky::fusion::{egtm_restore, inverse_voxel_restore, lucky_fuse, WeightMap};
use turblucky::net::layers::{
    add, relu, softmax_channels, tanh, weighted_frame_sum, Conv2d,
};
use turblucky::net::{count_params_flops, forward, ModelParams, NetConfig, Tensor4, DEB_LAYERS, LAYER_COUNT};
use turblucky::sim::{simulate_procedural_dataset, DatasetShape, EventSimConfig, TurbulenceConfig};
use turblucky::train::{cosine_lr, loss_tensor, train_with_validation, LossConfig, TrainConfig};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_tensor(rng: &mut ChaCha8Rng, dims: [usize; 4], lo: f64, hi: f64) -> Tensor4 {
    let data = (0..dims.iter().product()).map(|_| rng.random_range(lo..hi)).collect();
    Tensor4::from_vec(dims[0], dims[1], dims[2], dims[3], data).unwrap()
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-12)
}

// 1 -------------------------------------------------------------------------

fn voxel_exactness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for trial in 0..100 {
        let (w, h) = (rng.random_range(1..40u32), rng.random_range(1..40u32));
        let duration = rng.random_range(1..200_000u64);
        let bins = rng.random_range(1..50usize);
        let count = if trial == 0 { 100_000 } else { rng.random_range(0..=100_000) };
        let events: Vec<Event> = (0..count)
            .map(|_| {
                let p = if rng.random_bool(0.5) { Polarity::On } else { Polarity::Off };
                Event::new(rng.random_range(0..=duration), rng.random_range(0..w), rng.random_range(0..h), p)
            })
            .collect();
        let stream = EventStream::from_unsorted(events, duration, w, h).unwrap();
        let voxel = voxelize(&stream, &VoxelConfig::new(bins, duration).unwrap()).unwrap();

        // brute force: bin by floating-point interval membership, last bin closed
        let mut hist = vec![0u32; bins * (w * h) as usize];
        let dt = duration as f64 / bins as f64;
        for e in stream.events() {
            let t = e.t_us as f64;
            let b = (0..bins)
                .find(|&b| t >= b as f64 * dt && (t < (b + 1) as f64 * dt || b == bins - 1))
                .unwrap();
            hist[(b * h as usize + e.y as usize) * w as usize + e.x as usize] += 1;
        }
        if voxel.total() != stream.len() as f64 {
            return Err(format!("trial {trial}: total {} vs {} events", voxel.total(), stream.len()));
        }
        if let Some(i) = voxel.data().iter().zip(&hist).position(|(&v, &c)| v != c as f32) {
            return Err(format!("trial {trial}: cell {i} differs from the histogram"));
        }
    }
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(10), format!("100 streams exact in {elapsed:.2?} (limit 10 s)"))
}

// 2 -------------------------------------------------------------------------

fn mirror(i: isize, n: usize) -> usize {
    if i < 0 {
        (-i) as usize
    } else if i as usize >= n {
        2 * (n - 1) - i as usize
    } else {
        i as usize
    }
}

fn naive_conv(conv: &Conv2d, x: &Tensor4, w: &[f64], b: &[f64]) -> Tensor4 {
    let (k, p) = (conv.kernel, (conv.kernel / 2) as isize);
    let (cin_g, cout_g) = (conv.in_channels / conv.groups, conv.out_channels / conv.groups);
    let mut out = Tensor4::zeros(x.n, conv.out_channels, x.h, x.w);
    for n in 0..x.n {
        for oc in 0..conv.out_channels {
            for y in 0..x.h {
                for xx in 0..x.w {
                    let mut acc = b[oc];
                    for icl in 0..cin_g {
                        let ic = (oc / cout_g) * cin_g + icl;
                        for ky in 0..k {
                            for kx in 0..k {
                                let sy = mirror(y as isize + ky as isize - p, x.h);
                                let sx = mirror(xx as isize + kx as isize - p, x.w);
                                acc += w[((oc * cin_g + icl) * k + ky) * k + kx] * x.at(n, ic, sy, sx);
                            }
                        }
                    }
                    let i = out.index(n, oc, y, xx);
                    out.data[i] = acc;
                }
            }
        }
    }
    out
}

fn naive_elementwise(x: &Tensor4, f: impl Fn(f64) -> f64) -> Tensor4 {
    let mut out = x.clone();
    for i in 0..out.data.len() {
        out.data[i] = f(x.data[i]);
    }
    out
}

fn naive_softmax(x: &Tensor4) -> Tensor4 {
    let mut out = x.clone();
    for n in 0..x.n {
        for y in 0..x.h {
            for xx in 0..x.w {
                let denom: f64 = (0..x.c).map(|c| x.at(n, c, y, xx).exp()).sum();
                for c in 0..x.c {
                    let i = out.index(n, c, y, xx);
                    out.data[i] = x.at(n, c, y, xx).exp() / denom;
                }
            }
        }
    }
    out
}

fn naive_weighted_sum(wts: &Tensor4, frames: &Tensor4) -> Tensor4 {
    let ch = frames.c / wts.c;
    let mut out = Tensor4::zeros(wts.n, ch, wts.h, wts.w);
    for n in 0..wts.n {
        for c in 0..ch {
            for y in 0..wts.h {
                for x in 0..wts.w {
                    let mut acc = 0.0;
                    for i in 0..wts.c {
                        acc += wts.at(n, i, y, x) * frames.at(n, i * ch + c, y, x);
                    }
                    let idx = out.index(n, c, y, x);
                    out.data[idx] = acc;
                }
            }
        }
    }
    out
}

fn max_rel(a: &Tensor4, b: &Tensor4) -> f64 {
    assert_eq!(a.dims(), b.dims());
    a.data.iter().zip(&b.data).map(|(&x, &y)| (x - y).abs() / y.abs().max(1.0)).fold(0.0, f64::max)
}

fn layer_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst: Vec<(&str, f64)> = Vec::new();
    let mut record = |name: &'static str, err: f64| match worst.iter_mut().find(|(n, _)| *n == name) {
        Some(entry) => entry.1 = entry.1.max(err),
        None => worst.push((name, err)),
    };
    for _ in 0..20 {
        let (n, h, w) = (rng.random_range(1..3), rng.random_range(3..9), rng.random_range(3..9));
        let c = rng.random_range(1..7);
        let convs = [
            ("depthwise3x3", Conv2d::depthwise(c, 3)),
            ("pointwise1x1", Conv2d::pointwise(c, rng.random_range(1..7))),
            ("conv3x3", Conv2d::new(c, rng.random_range(1..7), 3, 1)),
        ];
        for (name, conv) in convs {
            let x = random_tensor(&mut rng, [n, c, h, w], -1.0, 1.0);
            let wt: Vec<f64> = (0..conv.weight_len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..conv.out_channels).map(|_| rng.random_range(-1.0..1.0)).collect();
            record(name, max_rel(&conv.forward(&x, &wt, &b).unwrap(), &naive_conv(&conv, &x, &wt, &b)));
        }
        let x = random_tensor(&mut rng, [n, c, h, w], -3.0, 3.0);
        record("relu", max_rel(&relu(&x), &naive_elementwise(&x, |v| if v > 0.0 { v } else { 0.0 })));
        record("tanh", max_rel(&tanh(&x), &naive_elementwise(&x, f64::tanh)));
        record("softmax", max_rel(&softmax_channels(&x), &naive_softmax(&x)));
        let frames_per = rng.random_range(2..5);
        let ch = if rng.random_bool(0.5) { 3 } else { 1 };
        let wts = random_tensor(&mut rng, [n, frames_per, h, w], 0.0, 1.0);
        let frames = random_tensor(&mut rng, [n, frames_per * ch, h, w], 0.0, 1.0);
        record("multiply-sum", max_rel(&weighted_frame_sum(&wts, &frames).unwrap(), &naive_weighted_sum(&wts, &frames)));
        let y = random_tensor(&mut rng, [n, c, h, w], -1.0, 1.0);
        let mut expected = x.clone();
        for i in 0..expected.data.len() {
            expected.data[i] = x.data[i] + y.data[i];
        }
        record("sum", max_rel(&add(&x, &y).unwrap(), &expected));
    }
    let max = worst.iter().map(|(_, e)| *e).fold(0.0, f64::max);
    let detail = worst.iter().map(|(n, e)| format!("{n} {e:.1e}")).collect::<Vec<_>>().join(", ");
    check(max < 1e-6, format!("20 trials per op, worst relative error: {detail}"))
}

// 3 -------------------------------------------------------------------------

/// Smallest distance of any ReLU input or pre-clamp output from its kink, and
/// the smallest share of units passing gradient over the ReLU layers and the clamp.
fn kink_margin(params: &ModelParams, voxel: &Tensor4, frames: &Tensor4) -> (f64, f64) {
    let layers = params.config().layers();
    let conv = |l: usize, x: &Tensor4| layers[l].forward(x, &params.weights[l], &params.biases[l]).unwrap();
    let (mut margin, mut active) = (f64::INFINITY, 1.0f64);
    let mut relu_tracked = |z: Tensor4| {
        margin = z.data.iter().fold(margin, |m, v| m.min(v.abs()));
        let on = z.data.iter().filter(|&&v| v > 0.0).count();
        active = active.min(on as f64 / z.data.len() as f64);
        relu(&z)
    };
    let mut x = voxel.clone();
    for block in 0..3 {
        x = relu_tracked(conv(2 * block + 1, &conv(2 * block, &x)));
    }
    let h = relu_tracked(conv(6, &x));
    let h = relu_tracked(conv(7, &h));
    let fused = weighted_frame_sum(&softmax_channels(&conv(8, &h)), frames).unwrap();
    let h = relu_tracked(conv(9, &fused));
    let h = relu_tracked(conv(10, &h));
    let combined = add(&fused, &tanh(&conv(11, &h))).unwrap();
    let margin = combined.data.iter().fold(margin, |m, v| m.min(v.abs()).min((1.0 - v).abs()));
    let inside = combined.data.iter().filter(|v| (0.0..=1.0).contains(*v)).count();
    (margin, active.min(inside as f64 / combined.data.len() as f64))
}

struct GradInstance {
    params: ModelParams,
    voxel: Tensor4,
    frames: Tensor4,
    probe: Tensor4,
    margin: f64,
    active: f64,
    seed: u64,
}

fn gradient_instance(seed: u64) -> GradInstance {
    let config = NetConfig::for_frames(2, 1);
    let mut params = ModelParams::init(config, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // a non-zero detail head so its hidden layers receive gradient too
    for v in &mut params.weights[DEB_LAYERS.end - 1] {
        *v = rng.random_range(-0.1..0.1);
    }
    for b in params.biases.iter_mut().flatten() {
        *b = rng.random_range(0.0..0.05);
    }
    let voxel = random_tensor(&mut rng, [1, config.bins, 8, 8], 0.0, 2.0);
    let frames = random_tensor(&mut rng, [1, 2, 8, 8], 0.2, 0.8);
    let probe = random_tensor(&mut rng, [1, 1, 8, 8], -1.0, 1.0);
    let (margin, active) = kink_margin(&params, &voxel, &frames);
    GradInstance { params, voxel, frames, probe, margin, active, seed }
}

fn network_gradients() -> Outcome {
    let start = Instant::now();
    // ReLU and clamp kinks within one step of the evaluation point corrupt central
    // differences, so take the first instance whose activations keep clear of them
    // while every ReLU layer still passes gradient through a fair share of units.
    const MARGIN: f64 = 1e-3;
    const ACTIVE: f64 = 0.2;
    let inst = (0..5000u64)
        .map(gradient_instance)
        .find(|g| g.margin > MARGIN && g.active > ACTIVE)
        .ok_or("no kink-free instance among 5000 candidates")?;
    let nonzero = {
        let (_, tape) = forward(&inst.params, &inst.voxel, &inst.frames).unwrap();
        let g = tape.backward(&inst.params, &inst.probe).unwrap().params;
        g.weights.iter().filter(|w| w.iter().any(|&v| v != 0.0)).count()
    };
    if nonzero != LAYER_COUNT {
        return Err(format!("only {nonzero} of {LAYER_COUNT} layers receive gradient"));
    }
    let GradInstance { params, voxel, frames, probe, .. } = &inst;
    let objective = |p: &ModelParams| -> f64 {
        let (out, _) = forward(p, voxel, frames).unwrap();
        out.output.data.iter().zip(&probe.data).map(|(a, b)| a * b).sum()
    };
    let (_, tape) = forward(params, voxel, frames).unwrap();
    let grads = tape.backward(params, probe).unwrap().params;
    let h = 1e-4;
    let (mut worst, mut count, mut where_) = (0.0f64, 0usize, String::new());
    for layer in 0..LAYER_COUNT {
        let buffers = [(&params.weights[layer], &grads.weights[layer], true), (&params.biases[layer], &grads.biases[layer], false)];
        for (values, analytic, is_weight) in buffers {
            for i in 0..values.len() {
                let (mut up, mut down) = (params.clone(), params.clone());
                let (u, d) = if is_weight {
                    (&mut up.weights[layer][i], &mut down.weights[layer][i])
                } else {
                    (&mut up.biases[layer][i], &mut down.biases[layer][i])
                };
                *u += h;
                *d -= h;
                let fd = (objective(&up) - objective(&down)) / (2.0 * h);
                let err = if fd.abs().max(analytic[i].abs()) < 1e-8 { 0.0 } else { rel_err(fd, analytic[i]) };
                if err > worst {
                    worst = err;
                    where_ = format!("layer {layer} {} {i}", if is_weight { "weight" } else { "bias" });
                }
                count += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    check(
        worst < 1e-4 && elapsed < Duration::from_secs(60),
        format!(
            "{count} parameters, max relative error {worst:.2e} at {where_}; instance {} with kink margin {:.1e}, min active share {:.2}; {elapsed:.2?} (limit 60 s)",
            inst.seed, inst.margin, inst.active
        ),
    )
}

// 4 -------------------------------------------------------------------------

fn efficiency() -> Outcome {
    let cost = count_params_flops(NetConfig::for_frames(11, 3), 256, 256).unwrap();
    let gflops = cost.flops as f64 / 1e9;
    check(
        (5_000..=50_000).contains(&cost.params) && (0.8..=2.5).contains(&gflops),
        format!("{} parameters (0.02M reported), {gflops:.3} GFLOPs at 256x256 (1.5 reported)", cost.params),
    )
}

// 5 -------------------------------------------------------------------------

fn correlation() -> Outcome {
    let start = Instant::now();
    let data = simulate_procedural_dataset(
        30,
        DatasetShape::default(),
        &TurbulenceConfig::default(),
        &EventSimConfig::default(),
        505,
    )
    .unwrap();
    let report = correlation_study(&data, &CorrelationConfig { seed: 505, ..Default::default() }).unwrap();
    let rows = &report.rows;
    let ok = rows.len() == 9 + 5 && rows.iter().all(|r| r.stats.r > 0.2 && r.stats.p < 1e-3);
    let fmt = |kind: WindowKind| {
        rows.iter()
            .filter(|r| r.kind == kind)
            .map(|r| format!("{}:{:.2}", r.window, r.stats.r))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let max_p = rows.iter().map(|r| r.stats.p).fold(0.0, f64::max);
    let elapsed = start.elapsed();
    check(
        ok && elapsed < Duration::from_secs(300),
        format!(
            "r spatial [{}] temporal [{}], max p {max_p:.1e}, {elapsed:.1?} (real-data range 0.52-0.78, not binding)",
            fmt(WindowKind::Spatial),
            fmt(WindowKind::Temporal)
        ),
    )
}

// 6 -------------------------------------------------------------------------

fn mean_scores(test: &[Sample], restore: impl Fn(&Sample) -> Image) -> (f64, f64) {
    let (mut p, mut s) = (0.0, 0.0);
    for sample in test {
        let image = restore(sample);
        p += psnr(&image, &sample.gt).unwrap();
        s += ssim(&image, &sample.gt).unwrap();
    }
    (p / test.len() as f64, s / test.len() as f64)
}

fn ablation() -> Outcome {
    let start = Instant::now();
    let data = simulate_procedural_dataset(
        40,
        DatasetShape::default(),
        &TurbulenceConfig::default(),
        &EventSimConfig::default(),
        606,
    )
    .unwrap();
    let (train, test) = data.split_at(30);
    let config = TrainConfig {
        epochs: 20,
        batch_size: 8,
        deterministic: true,
        ..TrainConfig::default()
    };
    let train_refs: Vec<&Sample> = train.iter().collect();
    let outcome = train_with_validation(&train_refs, &[], &config, &LossConfig::default(), |_| {}).unwrap();
    let mean = mean_scores(test, |s| s.turbulent.temporal_mean());
    let iv = mean_scores(test, |s| inverse_voxel_restore(&s.turbulent, &s.events).unwrap());
    let egtm = mean_scores(test, |s| egtm_restore(&s.turbulent, &s.events, &outcome.params).unwrap());
    let elapsed = start.elapsed();
    let ok = iv.0 - mean.0 >= 0.3 && egtm.0 - iv.0 >= 0.3 && egtm.1 >= iv.1 && elapsed < Duration::from_secs(1800);
    check(
        ok,
        format!(
            "PSNR mean {:.3} < inverse-voxel {:.3} ({:+.2}) < EGTM {:.3} ({:+.2}); SSIM inverse-voxel {:.4} vs EGTM {:.4}; {elapsed:.0?}",
            mean.0,
            iv.0,
            iv.0 - mean.0,
            egtm.0,
            egtm.0 - iv.0,
            iv.1,
            egtm.1
        ),
    )
}

// 7 -------------------------------------------------------------------------

fn normalization() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let config = NetConfig::for_frames(3, 3);
    let mut worst_sum: f64 = 0.0;
    let mut identity = true;
    for trial in 0..100 {
        let params = ModelParams::init(config, trial).unwrap();
        let scale = rng.random_range(0.1..20.0);
        let voxel = random_tensor(&mut rng, [1, config.bins, 6, 7], 0.0, scale);
        let frames = random_tensor(&mut rng, [1, 9, 6, 7], 0.0, 1.0);
        let (out, _) = forward(&params, &voxel, &frames).unwrap();
        for p in 0..42 {
            let total: f64 = (0..3).map(|i| out.weights.plane(0, i)[p]).sum();
            worst_sum = worst_sum.max((total - 1.0).abs());
        }
        identity &= out.output == out.fused;
    }
    let seq = FrameSequence::new(
        (0..5)
            .map(|_| {
                let d = (0..16 * 12 * 3).map(|_| rng.random_range(0.0..=1.0)).collect();
                Image::new(16, 12, 3, d).unwrap()
            })
            .collect(),
        1_000,
    )
    .unwrap();
    let fused = lucky_fuse(&seq, &WeightMap::uniform(5, 12, 16).unwrap()).unwrap();
    let mean = seq.temporal_mean();
    let mean_err = fused.data().iter().zip(mean.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    check(
        worst_sum <= 1e-5 && identity && mean_err <= 1e-6,
        format!(
            "weight sums within {worst_sum:.1e}, zero-init detail block identity {}, uniform fusion vs mean {mean_err:.1e}",
            if identity { "bit-exact" } else { "BROKEN" }
        ),
    )
}

// 8 -------------------------------------------------------------------------

fn cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_turblucky"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

fn tree_bytes(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                files.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    files.sort();
    files
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = tmp.path().join("data");
    let model = tmp.path().join("model");
    let (d, m) = (data.to_str().unwrap(), model.to_str().unwrap());
    let mut datasets = Vec::new();
    let mut runs = Vec::new();
    for _ in 0..2 {
        cli(&["simulate", "--out", d, "--samples", "6", "--size", "32x32", "--seed", "808", "--force"])?;
        cli(&["train", "--data", d, "--out", m, "--epochs", "3", "--batch-size", "2", "--seed", "808", "--deterministic"])?;
        datasets.push(tree_bytes(&data));
        runs.push(tree_bytes(&model));
        std::fs::remove_dir_all(&data).map_err(|e| e.to_string())?;
        std::fs::remove_dir_all(&model).map_err(|e| e.to_string())?;
    }
    let same_data = datasets[0] == datasets[1];
    let log = |r: &[(String, Vec<u8>)]| r.iter().find(|(n, _)| n == "metrics.csv").map(|(_, b)| b.clone());
    let same_log = log(&runs[0]).is_some() && log(&runs[0]) == log(&runs[1]);
    check(
        same_data && same_log,
        format!(
            "{} dataset files byte-identical {same_data}; metric logs identical {same_log}; model files identical {}",
            datasets[0].len(),
            runs[0] == runs[1]
        ),
    )
}

// 9 -------------------------------------------------------------------------

fn loss_contract() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let cfg = LossConfig::default();
    let gt = random_tensor(&mut rng, [1, 3, 9, 9], 0.0, 1.0);
    let at_gt = loss_tensor(&gt, &gt, &cfg).unwrap().value;
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let pred = random_tensor(&mut rng, [1, 3, 9, 9], 0.0, 1.0);
        let gt = random_tensor(&mut rng, [1, 3, 9, 9], 0.0, 1.0);
        let grad = loss_tensor(&pred, &gt, &cfg).unwrap().grad;
        for i in 0..pred.data.len() {
            let h = 1e-6;
            let (mut up, mut down) = (pred.clone(), pred.clone());
            up.data[i] += h;
            down.data[i] -= h;
            let fd = (loss_tensor(&up, &gt, &cfg).unwrap().value - loss_tensor(&down, &gt, &cfg).unwrap().value) / (2.0 * h);
            worst = worst.max(rel_err(fd, grad.data[i]));
        }
    }
    let lr0 = TrainConfig::default().lr0;
    let (first, last) = (cosine_lr(0, 100, lr0), cosine_lr(100, 100, lr0));
    check(
        at_gt == 0.0 && worst < 1e-4 && first == 5e-3 && last == 0.0,
        format!("loss(gt, gt) = {at_gt}, gradient max relative error {worst:.2e}, schedule {first} -> {last}"),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("voxelization exactness", voxel_exactness),
        ("layer oracle equivalence", layer_oracles),
        ("gradient correctness", network_gradients),
        ("efficiency accounting", efficiency),
        ("event density correlation", correlation),
        ("ablation ordering", ablation),
        ("normalization and identity", normalization),
        ("determinism", determinism),
        ("loss contract", loss_contract),
    ];
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let id = i + 1;
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match result {
            Ok(detail) => println!("criterion {id} {name}: PASS ({detail})"),
            Err(detail) => {
                failed += 1;
                println!("criterion {id} {name}: FAIL ({detail})");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
