use serde::{Deserialize, Serialize};

use crate::data::Image;
use crate::error::{Error, Result};
use crate::filter::reflect;
use crate::net::Tensor4;

/// Keeps the gradient magnitude differentiable where both Sobel responses vanish.
const MAGNITUDE_EPS: f64 = 1e-12;

const SOBEL_X: [[f64; 3]; 3] = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
const SOBEL_Y: [[f64; 3]; 3] = [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerceptualMode {
    /// L1 distance between Sobel gradient magnitudes.
    #[default]
    GradientSurrogate,
    Off,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossConfig {
    pub lambda: f64,
    pub perceptual_mode: PerceptualMode,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            lambda: 0.3,
            perceptual_mode: PerceptualMode::GradientSurrogate,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::validation(format!("lambda {} must be >= 0", self.lambda)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LossValue {
    pub value: f64,
    /// Subgradient with respect to the prediction, same shape as the input.
    pub grad: Tensor4,
}

#[inline]
fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Sobel responses of one plane with reflect padding.
fn sobel(plane: &[f64], w: usize, h: usize) -> (Vec<f64>, Vec<f64>) {
    let mut gx = vec![0.0; plane.len()];
    let mut gy = vec![0.0; plane.len()];
    for y in 0..h {
        for x in 0..w {
            let (mut sx, mut sy) = (0.0, 0.0);
            for dy in 0..3 {
                let yy = reflect(y as isize + dy as isize - 1, h);
                for dx in 0..3 {
                    let v = plane[yy * w + reflect(x as isize + dx as isize - 1, w)];
                    sx += SOBEL_X[dy][dx] * v;
                    sy += SOBEL_Y[dy][dx] * v;
                }
            }
            gx[y * w + x] = sx;
            gy[y * w + x] = sy;
        }
    }
    (gx, gy)
}

/// Adjoint of [`sobel`]: accumulates `K^T gx + K^T gy` into `out`.
fn sobel_adjoint(gx: &[f64], gy: &[f64], w: usize, h: usize, out: &mut [f64]) {
    for y in 0..h {
        for x in 0..w {
            let (ax, ay) = (gx[y * w + x], gy[y * w + x]);
            for dy in 0..3 {
                let yy = reflect(y as isize + dy as isize - 1, h);
                for dx in 0..3 {
                    let idx = yy * w + reflect(x as isize + dx as isize - 1, w);
                    out[idx] += SOBEL_X[dy][dx] * ax + SOBEL_Y[dy][dx] * ay;
                }
            }
        }
    }
}

fn magnitude(gx: &[f64], gy: &[f64]) -> Vec<f64> {
    gx.iter()
        .zip(gy)
        .map(|(a, b)| (a * a + b * b + MAGNITUDE_EPS).sqrt())
        .collect()
}

/// `mean |pred - gt| + lambda * mean |S(pred) - S(gt)|`, where `S` is the per-channel
/// Sobel gradient magnitude. Means run over every element of the tensor.
pub fn loss_tensor(pred: &Tensor4, gt: &Tensor4, config: &LossConfig) -> Result<LossValue> {
    config.validate()?;
    if !pred.same_shape(gt) {
        return Err(Error::shape(format!(
            "prediction {:?} vs reference {:?}",
            pred.dims(),
            gt.dims()
        )));
    }
    let count = pred.data.len() as f64;
    let mut grad = Tensor4::zeros(pred.n, pred.c, pred.h, pred.w);
    let mut value = 0.0;
    for ((g, p), t) in grad.data.iter_mut().zip(&pred.data).zip(&gt.data) {
        value += (p - t).abs();
        *g = sign(p - t) / count;
    }
    value /= count;

    if config.perceptual_mode == PerceptualMode::GradientSurrogate && config.lambda > 0.0 {
        let (w, h) = (pred.w, pred.h);
        let mut perc = 0.0;
        for b in 0..pred.n {
            for c in 0..pred.c {
                let (px, py) = sobel(pred.plane(b, c), w, h);
                let (tx, ty) = sobel(gt.plane(b, c), w, h);
                let mp = magnitude(&px, &py);
                let mt = magnitude(&tx, &ty);
                let mut ax = vec![0.0; mp.len()];
                let mut ay = vec![0.0; mp.len()];
                for i in 0..mp.len() {
                    perc += (mp[i] - mt[i]).abs();
                    let s = config.lambda * sign(mp[i] - mt[i]) / count / mp[i];
                    ax[i] = s * px[i];
                    ay[i] = s * py[i];
                }
                sobel_adjoint(&ax, &ay, w, h, grad.plane_mut(b, c));
            }
        }
        value += config.lambda * perc / count;
    }
    Ok(LossValue { value, grad })
}

/// Image form of [`loss_tensor`]; the gradient is channel-first, batch of one.
pub fn loss(pred: &Image, gt: &Image, config: &LossConfig) -> Result<LossValue> {
    pred.ensure_same_dims(gt)?;
    loss_tensor(&Tensor4::from_image(pred), &Tensor4::from_image(gt), config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, c: usize, h: usize, w: usize) -> Tensor4 {
        let data = (0..c * h * w).map(|_| rng.random_range(0.05..0.95)).collect();
        Tensor4::from_vec(1, c, h, w, data).unwrap()
    }

    /// Direct loops with zero-based borders handled by explicit mirroring.
    fn oracle(pred: &Tensor4, gt: &Tensor4, lambda: f64) -> f64 {
        let (c, h, w) = (pred.c, pred.h, pred.w);
        let mirror = |i: isize, n: usize| -> usize {
            if i < 0 {
                (-i) as usize
            } else if i as usize >= n {
                2 * n - 2 - i as usize
            } else {
                i as usize
            }
        };
        let mag = |t: &Tensor4, ch: usize, y: usize, x: usize| -> f64 {
            let mut gx = 0.0;
            let mut gy = 0.0;
            for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    let v = t.at(0, ch, mirror(y as isize + dy, h), mirror(x as isize + dx, w));
                    let wx = dx as f64 * if dy == 0 { 2.0 } else { 1.0 };
                    let wy = dy as f64 * if dx == 0 { 2.0 } else { 1.0 };
                    gx += wx * v;
                    gy += wy * v;
                }
            }
            (gx * gx + gy * gy + MAGNITUDE_EPS).sqrt()
        };
        let mut rec = 0.0;
        let mut perc = 0.0;
        for ch in 0..c {
            for y in 0..h {
                for x in 0..w {
                    rec += (pred.at(0, ch, y, x) - gt.at(0, ch, y, x)).abs();
                    perc += (mag(pred, ch, y, x) - mag(gt, ch, y, x)).abs();
                }
            }
        }
        let n = (c * h * w) as f64;
        rec / n + lambda * perc / n
    }

    #[test]
    fn identical_inputs_give_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random(&mut rng, 3, 9, 10);
        let l = loss_tensor(&a, &a, &LossConfig::default()).unwrap();
        assert_eq!(l.value, 0.0);
        assert!(l.grad.data.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn constant_offset_without_perceptual_term() {
        let p = Image::filled(8, 8, 3, 0.6).unwrap();
        let g = Image::filled(8, 8, 3, 0.5).unwrap();
        let cfg = LossConfig {
            lambda: 0.0,
            ..LossConfig::default()
        };
        assert!((loss(&p, &g, &cfg).unwrap().value - 0.1).abs() < 1e-12);
        let off = LossConfig {
            perceptual_mode: PerceptualMode::Off,
            ..LossConfig::default()
        };
        assert!((loss(&p, &g, &off).unwrap().value - 0.1).abs() < 1e-12);
    }

    #[test]
    fn matches_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..5 {
            let a = random(&mut rng, 3, 8, 11);
            let b = random(&mut rng, 3, 8, 11);
            let l = loss_tensor(&a, &b, &LossConfig::default()).unwrap();
            assert!((l.value - oracle(&a, &b, 0.3)).abs() < 1e-6);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = LossConfig::default();
        let a = random(&mut rng, 1, 8, 8);
        let b = random(&mut rng, 1, 8, 8);
        let l = loss_tensor(&a, &b, &cfg).unwrap();
        let h = 1e-6;
        for i in [0, 9, 27, 63] {
            let mut plus = a.clone();
            plus.data[i] += h;
            let mut minus = a.clone();
            minus.data[i] -= h;
            let fd = (loss_tensor(&plus, &b, &cfg).unwrap().value
                - loss_tensor(&minus, &b, &cfg).unwrap().value)
                / (2.0 * h);
            let g = l.grad.data[i];
            assert!((fd - g).abs() <= 1e-4 * g.abs().max(1e-3), "{i}: {fd} vs {g}");
        }
    }

    #[test]
    fn rejects_mismatch_and_negative_lambda() {
        let a = Image::filled(8, 8, 1, 0.5).unwrap();
        let b = Image::filled(9, 8, 1, 0.5).unwrap();
        assert!(loss(&a, &b, &LossConfig::default()).is_err());
        let neg = LossConfig {
            lambda: -1.0,
            ..LossConfig::default()
        };
        assert!(loss(&a, &a, &neg).is_err());
    }
}
