use crate::data::Image;
use crate::error::{Error, Result};

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

pub fn mse(pred: &Image, gt: &Image) -> Result<f64> {
    pred.ensure_same_dims(gt)?;
    let sum: f64 = pred
        .data()
        .iter()
        .zip(gt.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / pred.data().len() as f64)
}

/// `10 log10(1 / MSE)` for unit dynamic range; identical images give `+inf`.
pub fn psnr(pred: &Image, gt: &Image) -> Result<f64> {
    let mse = mse(pred, gt)?;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (1.0 / mse).log10())
}

/// Mean SSIM over all fully contained 11x11 Gaussian windows (sigma 1.5) of the
/// luminance planes.
pub fn ssim(pred: &Image, gt: &Image) -> Result<f64> {
    pred.ensure_same_dims(gt)?;
    let (w, h) = (pred.width(), pred.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::validation(format!(
            "SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW}, image is {w}x{h}"
        )));
    }
    let (a, b) = (pred.luminance(), gt.luminance());
    let (a, b) = (a.data(), b.data());
    let kernel = ssim_kernel();

    let square = |v: &[f64]| v.iter().map(|x| x * x).collect::<Vec<_>>();
    let cross: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    let mu_a = valid_filter(a, w, h, &kernel);
    let mu_b = valid_filter(b, w, h, &kernel);
    let aa = valid_filter(&square(a), w, h, &kernel);
    let bb = valid_filter(&square(b), w, h, &kernel);
    let ab = valid_filter(&cross, w, h, &kernel);

    let (c1, c2) = (SSIM_K1 * SSIM_K1, SSIM_K2 * SSIM_K2);
    let total: f64 = (0..mu_a.len())
        .map(|i| {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = aa[i] - ma * ma;
            let vb = bb[i] - mb * mb;
            let cov = ab[i] - ma * mb;
            ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2))
        })
        .sum();
    Ok(total / mu_a.len() as f64)
}

fn ssim_kernel() -> Vec<f64> {
    let r = (SSIM_WINDOW / 2) as i32;
    let taps: Vec<f64> = (-r..=r)
        .map(|i| (-(i * i) as f64 / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / sum).collect()
}

/// Separable correlation without padding; output is `(w - k + 1) x (h - k + 1)`.
fn valid_filter(plane: &[f64], w: usize, h: usize, kernel: &[f64]) -> Vec<f64> {
    let k = kernel.len();
    let (ow, oh) = (w - k + 1, h - k + 1);
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = kernel
                .iter()
                .zip(&plane[y * w + x..y * w + x + k])
                .map(|(a, b)| a * b)
                .sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for (j, kv) in kernel.iter().enumerate() {
            let src = &rows[(y + j) * ow..(y + j + 1) * ow];
            for (o, s) in out[y * ow..(y + 1) * ow].iter_mut().zip(src) {
                *o += kv * s;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img(f: impl FnMut(usize, usize, usize) -> f64) -> Image {
        Image::from_fn(24, 20, 1, f).unwrap()
    }

    #[test]
    fn psnr_reference_values() {
        let a = img(|x, y, _| (x + y) as f64 / 50.0);
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
        let b = Image::filled(16, 16, 3, 0.5).unwrap();
        let c = Image::filled(16, 16, 3, 0.6).unwrap();
        assert!((psnr(&b, &c).unwrap() - 20.0).abs() < 1e-9);
    }

    #[test]
    fn psnr_matches_loop_oracle() {
        let a = img(|x, y, _| ((x * 31 + y * 17) % 97) as f64 / 96.0);
        let b = img(|x, y, _| ((x * 13 + y * 7) % 89) as f64 / 88.0);
        let mut se = 0.0;
        for y in 0..20 {
            for x in 0..24 {
                se += (a.get(x, y, 0) - b.get(x, y, 0)).powi(2);
            }
        }
        let oracle = 10.0 * (480.0 / se).log10();
        assert!((psnr(&a, &b).unwrap() - oracle).abs() < 1e-9);
    }

    #[test]
    fn ssim_matches_direct_window_oracle() {
        let a = img(|x, y, _| ((x * 31 + y * 17) % 97) as f64 / 96.0);
        let b = img(|x, y, _| ((x * 5 + y * 3) % 23) as f64 / 22.0 * 0.5 + a_val(x, y) * 0.5);
        fn a_val(x: usize, y: usize) -> f64 {
            ((x * 31 + y * 17) % 97) as f64 / 96.0
        }
        // direct 2D Gaussian-weighted statistics per window
        let mut g = [[0.0; 11]; 11];
        let mut norm = 0.0;
        for (i, row) in g.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                let (di, dj) = (i as f64 - 5.0, j as f64 - 5.0);
                *v = (-(di * di + dj * dj) / (2.0 * 1.5 * 1.5)).exp();
                norm += *v;
            }
        }
        let (c1, c2) = (1e-4, 9e-4);
        let mut total = 0.0;
        let mut count = 0.0;
        for y0 in 0..=9 {
            for x0 in 0..=13 {
                let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for i in 0..11 {
                    for j in 0..11 {
                        let wgt = g[i][j] / norm;
                        let (p, q) = (a.get(x0 + j, y0 + i, 0), b.get(x0 + j, y0 + i, 0));
                        ma += wgt * p;
                        mb += wgt * q;
                        saa += wgt * p * p;
                        sbb += wgt * q * q;
                        sab += wgt * p * q;
                    }
                }
                let (va, vb, cov) = (saa - ma * ma, sbb - mb * mb, sab - ma * mb);
                total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                    / ((ma * ma + mb * mb + c1) * (va + vb + c2));
                count += 1.0;
            }
        }
        assert!((ssim(&a, &b).unwrap() - total / count).abs() < 1e-10);
    }

    #[test]
    fn ssim_properties() {
        let a = img(|x, y, _| if (x / 3 + y / 3) % 2 == 0 { 1.0 } else { 0.0 });
        let inv = img(|x, y, _| 1.0 - a.get(x, y, 0));
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        assert!(ssim(&a, &inv).unwrap() < 0.2);
        let b = img(|x, y, _| ((x * y) % 7) as f64 / 6.0);
        assert!((ssim(&a, &b).unwrap() - ssim(&b, &a).unwrap()).abs() < 1e-12);
        let small = Image::filled(10, 10, 1, 0.5).unwrap();
        assert!(ssim(&small, &small).is_err());
    }

    #[test]
    fn psnr_decreases_with_noise_amplitude() {
        let gt = img(|x, y, _| 0.3 + 0.4 * ((x + y) % 2) as f64);
        let noisy = |amp: f64| img(|x, y, _| gt.get(x, y, 0) + amp * if (x * 7 + y * 3) % 2 == 0 { 1.0 } else { -1.0 });
        let vals: Vec<f64> = [0.01, 0.05, 0.1]
            .iter()
            .map(|&a| psnr(&noisy(a), &gt).unwrap())
            .collect();
        assert!(vals[0] > vals[1] && vals[1] > vals[2]);
    }
}
