//! Small 2D filtering helpers on row-major planes.

/// Mirror index without repeating the edge sample (`-1 -> 1`, `n -> n - 2`).
#[inline]
pub fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let mut m = i.rem_euclid(period);
    if m >= n as isize {
        m = period - m;
    }
    m as usize
}

/// Normalized Gaussian taps over `[-ceil(3 sigma), ceil(3 sigma)]`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let mut taps: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    taps
}

/// Applies the odd-length `kernel` along rows then columns with reflect padding.
pub fn separable_filter(plane: &[f64], width: usize, height: usize, kernel: &[f64]) -> Vec<f64> {
    let radius = (kernel.len() / 2) as isize;
    let mut tmp = vec![0.0; plane.len()];
    for y in 0..height {
        let row = &plane[y * width..(y + 1) * width];
        for x in 0..width {
            tmp[y * width + x] = kernel
                .iter()
                .enumerate()
                .map(|(k, w)| w * row[reflect(x as isize + k as isize - radius, width)])
                .sum();
        }
    }
    let mut out = vec![0.0; plane.len()];
    for y in 0..height {
        for (k, w) in kernel.iter().enumerate() {
            let src = reflect(y as isize + k as isize - radius, height);
            let (dst_row, src_row) = (y * width, src * width);
            for x in 0..width {
                out[dst_row + x] += w * tmp[src_row + x];
            }
        }
    }
    out
}

/// Offsets of a `size`-wide window around a centre pixel. Odd sizes are centred;
/// even sizes put the extra sample on the low (top/left) side.
#[inline]
pub fn window_bounds(center: usize, size: usize, n: usize) -> (usize, usize) {
    let lo = center as isize - (size / 2) as isize;
    let hi = lo + size as isize - 1;
    (lo.max(0) as usize, hi.min(n as isize - 1) as usize)
}

/// Mean over a `size x size` window clipped at the borders.
pub fn box_mean(plane: &[f64], width: usize, height: usize, size: usize) -> Vec<f64> {
    if size <= 1 {
        return plane.to_vec();
    }
    // summed-area table with a zero guard row/column
    let sw = width + 1;
    let mut sat = vec![0.0; sw * (height + 1)];
    for y in 0..height {
        let mut row = 0.0;
        for x in 0..width {
            row += plane[y * width + x];
            sat[(y + 1) * sw + x + 1] = sat[y * sw + x + 1] + row;
        }
    }
    let mut out = vec![0.0; plane.len()];
    for y in 0..height {
        let (y0, y1) = window_bounds(y, size, height);
        for x in 0..width {
            let (x0, x1) = window_bounds(x, size, width);
            let sum = sat[(y1 + 1) * sw + x1 + 1] - sat[y0 * sw + x1 + 1] - sat[(y1 + 1) * sw + x0]
                + sat[y0 * sw + x0];
            out[y * width + x] = sum / ((y1 - y0 + 1) * (x1 - x0 + 1)) as f64;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflect_indices() {
        let got: Vec<usize> = (-4..9).map(|i| reflect(i, 5)).collect();
        assert_eq!(got, vec![4, 3, 2, 1, 0, 1, 2, 3, 4, 3, 2, 1, 0]);
        assert_eq!(reflect(-3, 1), 0);
    }

    #[test]
    fn kernel_is_normalized() {
        let k = gaussian_kernel(1.5);
        assert_eq!(k.len(), 11);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn window_anchoring() {
        assert_eq!(window_bounds(5, 2, 10), (4, 5));
        assert_eq!(window_bounds(5, 3, 10), (4, 6));
        assert_eq!(window_bounds(0, 4, 10), (0, 1));
        assert_eq!(window_bounds(9, 10, 10), (4, 9));
    }

    #[test]
    fn box_mean_matches_brute_force() {
        let (w, h) = (9, 7);
        let plane: Vec<f64> = (0..w * h).map(|i| ((i * 37) % 11) as f64).collect();
        for size in 1..6 {
            let fast = box_mean(&plane, w, h, size);
            for y in 0..h {
                for x in 0..w {
                    let (x0, x1) = window_bounds(x, size, w);
                    let (y0, y1) = window_bounds(y, size, h);
                    let mut s = 0.0;
                    let mut n = 0.0;
                    for yy in y0..=y1 {
                        for xx in x0..=x1 {
                            s += plane[yy * w + xx];
                            n += 1.0;
                        }
                    }
                    assert!((fast[y * w + x] - s / n).abs() < 1e-12);
                }
            }
        }
    }
}
