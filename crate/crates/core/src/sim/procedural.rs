//! Seeded clean scenes used when no source images are supplied.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::Image;
use crate::error::Result;
use crate::filter::{gaussian_kernel, separable_filter};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SceneKind {
    Checkerboard,
    Glyphs,
    FilteredNoise,
}

impl SceneKind {
    pub fn for_index(index: u64) -> SceneKind {
        match index % 3 {
            0 => SceneKind::Checkerboard,
            1 => SceneKind::Glyphs,
            _ => SceneKind::FilteredNoise,
        }
    }
}

// 5x7 bitmaps, one byte per row, low 5 bits used (MSB of those is the left column).
const GLYPHS: [[u8; 7]; 16] = [
    [0x0e, 0x11, 0x11, 0x1f, 0x11, 0x11, 0x11], // A
    [0x1e, 0x11, 0x11, 0x1e, 0x11, 0x11, 0x1e], // B
    [0x0e, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0e], // C
    [0x1f, 0x10, 0x10, 0x1e, 0x10, 0x10, 0x1f], // E
    [0x11, 0x11, 0x11, 0x1f, 0x11, 0x11, 0x11], // H
    [0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11], // K
    [0x11, 0x1b, 0x15, 0x15, 0x11, 0x11, 0x11], // M
    [0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11], // N
    [0x1e, 0x11, 0x11, 0x1e, 0x10, 0x10, 0x10], // P
    [0x0f, 0x10, 0x10, 0x0e, 0x01, 0x01, 0x1e], // S
    [0x1f, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04], // T
    [0x11, 0x11, 0x11, 0x11, 0x0a, 0x0a, 0x04], // V
    [0x11, 0x11, 0x11, 0x15, 0x15, 0x1b, 0x11], // W
    [0x0e, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0e], // 0
    [0x04, 0x0c, 0x04, 0x04, 0x04, 0x04, 0x0e], // 1
    [0x0e, 0x11, 0x01, 0x06, 0x08, 0x10, 0x1f], // 2
];

fn random_color(rng: &mut ChaCha8Rng, channels: usize) -> Vec<f64> {
    if channels == 1 {
        return vec![rng.random_range(0.05..0.95)];
    }
    (0..channels).map(|_| rng.random_range(0.05..0.95)).collect()
}

/// Two colours far enough apart in mean intensity to give visible edges.
fn contrasting_pair(rng: &mut ChaCha8Rng, channels: usize) -> (Vec<f64>, Vec<f64>) {
    loop {
        let a = random_color(rng, channels);
        let b = random_color(rng, channels);
        let mean = |c: &[f64]| c.iter().sum::<f64>() / c.len() as f64;
        if (mean(&a) - mean(&b)).abs() > 0.3 {
            return (a, b);
        }
    }
}

/// Deterministic scene number `index` for `seed`.
pub fn procedural_scene(
    width: usize,
    height: usize,
    channels: usize,
    seed: u64,
    index: u64,
) -> Result<Image> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7363_656e_6573);
    rng.set_stream(index);
    match SceneKind::for_index(index) {
        SceneKind::Checkerboard => checkerboard(width, height, channels, &mut rng),
        SceneKind::Glyphs => glyphs(width, height, channels, &mut rng),
        SceneKind::FilteredNoise => filtered_noise(width, height, channels, &mut rng),
    }
}

fn checkerboard(w: usize, h: usize, ch: usize, rng: &mut ChaCha8Rng) -> Result<Image> {
    let cell = rng.random_range(4.0..12.0);
    let angle: f64 = rng.random_range(0.0..std::f64::consts::FRAC_PI_2);
    let (ox, oy) = (rng.random_range(0.0..cell), rng.random_range(0.0..cell));
    let (a, b) = contrasting_pair(rng, ch);
    let (s, c) = angle.sin_cos();
    Image::from_fn(w, h, ch, |x, y, k| {
        let (fx, fy) = (x as f64 + ox, y as f64 + oy);
        let u = ((c * fx + s * fy) / cell).floor() as i64;
        let v = ((-s * fx + c * fy) / cell).floor() as i64;
        if (u + v).rem_euclid(2) == 0 {
            a[k]
        } else {
            b[k]
        }
    })
}

fn glyphs(w: usize, h: usize, ch: usize, rng: &mut ChaCha8Rng) -> Result<Image> {
    let (bg, fg) = contrasting_pair(rng, ch);
    let scale = rng.random_range(1..=2usize);
    let (gw, gh) = (6 * scale, 8 * scale);
    let mut ink = vec![false; w * h];
    let mut y0 = rng.random_range(0..gh / 2 + 1);
    while y0 + 7 * scale <= h {
        let mut x0 = rng.random_range(0..gw / 2 + 1);
        while x0 + 5 * scale <= w {
            if rng.random_bool(0.85) {
                let glyph = &GLYPHS[rng.random_range(0..GLYPHS.len())];
                for (r, bits) in glyph.iter().enumerate() {
                    for col in 0..5 {
                        if bits >> (4 - col) & 1 == 1 {
                            for dy in 0..scale {
                                for dx in 0..scale {
                                    ink[(y0 + r * scale + dy) * w + x0 + col * scale + dx] = true;
                                }
                            }
                        }
                    }
                }
            }
            x0 += gw;
        }
        y0 += gh + rng.random_range(0..scale + 1);
    }
    Image::from_fn(w, h, ch, |x, y, k| if ink[y * w + x] { fg[k] } else { bg[k] })
}

fn filtered_noise(w: usize, h: usize, ch: usize, rng: &mut ChaCha8Rng) -> Result<Image> {
    let sigma = rng.random_range(1.5..4.0);
    let kernel = gaussian_kernel(sigma);
    let base: Vec<f64> = (0..w * h).map(|_| StandardNormal.sample(&mut *rng)).collect();
    let smooth = separable_filter(&base, w, h, &kernel);
    let (lo, hi) = smooth
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = (hi - lo).max(1e-12);
    let (a, b) = contrasting_pair(rng, ch);
    Image::from_fn(w, h, ch, |x, y, k| {
        let t = (smooth[y * w + x] - lo) / span;
        a[k] * (1.0 - t) + b[k] * t
    })
}
