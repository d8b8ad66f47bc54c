//! The closed set of operations the guidance network is built from, each with
//! its hand-written reverse pass.

use super::tensor::Tensor4;
use crate::error::{Error, Result};
use crate::filter::reflect;

/// Grouped 2D convolution with stride 1 and reflect padding `kernel / 2`.
///
/// Weights are laid out `[out, in / groups, k, k]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Conv2d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub groups: usize,
}

impl Conv2d {
    pub const fn new(in_channels: usize, out_channels: usize, kernel: usize, groups: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            kernel,
            groups,
        }
    }

    pub const fn pointwise(in_channels: usize, out_channels: usize) -> Self {
        Self::new(in_channels, out_channels, 1, 1)
    }

    pub const fn depthwise(channels: usize, kernel: usize) -> Self {
        Self::new(channels, channels, kernel, channels)
    }

    pub fn validate(&self) -> Result<()> {
        if self.groups == 0
            || self.in_channels % self.groups != 0
            || self.out_channels % self.groups != 0
            || self.kernel % 2 == 0
        {
            return Err(Error::shape(format!("invalid convolution {self:?}")));
        }
        Ok(())
    }

    pub fn in_per_group(&self) -> usize {
        self.in_channels / self.groups
    }

    pub fn out_per_group(&self) -> usize {
        self.out_channels / self.groups
    }

    pub fn weight_dims(&self) -> [usize; 4] {
        [self.out_channels, self.in_per_group(), self.kernel, self.kernel]
    }

    pub fn weight_len(&self) -> usize {
        self.weight_dims().iter().product()
    }

    pub fn fan_in(&self) -> usize {
        self.in_per_group() * self.kernel * self.kernel
    }

    /// `k^2 * in / groups * out + out`
    pub fn param_count(&self) -> usize {
        self.weight_len() + self.out_channels
    }

    /// Multiply-adds counted as two operations: `2 k^2 (in / groups) out H W`.
    pub fn flops(&self, height: usize, width: usize) -> u64 {
        2 * (self.kernel * self.kernel * self.in_per_group() * self.out_channels) as u64
            * (height * width) as u64
    }

    fn pad(&self) -> usize {
        self.kernel / 2
    }

    fn check(&self, input: &Tensor4, weight: &[f64], bias: &[f64]) -> Result<()> {
        self.validate()?;
        if input.c != self.in_channels {
            return Err(Error::shape(format!(
                "convolution expects {} input channels, got {}",
                self.in_channels, input.c
            )));
        }
        if weight.len() != self.weight_len() || bias.len() != self.out_channels {
            return Err(Error::shape("convolution parameter length mismatch"));
        }
        let p = self.pad();
        if p > 0 && (input.h <= p || input.w <= p) {
            return Err(Error::shape("input too small for reflect padding"));
        }
        Ok(())
    }

    /// Reflect-padded copy of one batch item, `in x (h + 2p) x (w + 2p)`.
    fn padded_item(&self, input: &Tensor4, b: usize) -> Vec<f64> {
        let p = self.pad();
        if p == 0 {
            return input.item(b).to_vec();
        }
        let (h, w) = (input.h, input.w);
        let (ph, pw) = (h + 2 * p, w + 2 * p);
        let mut out = vec![0.0; input.c * ph * pw];
        for c in 0..input.c {
            let src = input.plane(b, c);
            let dst = &mut out[c * ph * pw..(c + 1) * ph * pw];
            for py in 0..ph {
                let sy = reflect(py as isize - p as isize, h);
                for px in 0..pw {
                    dst[py * pw + px] = src[sy * w + reflect(px as isize - p as isize, w)];
                }
            }
        }
        out
    }

    pub fn forward(&self, input: &Tensor4, weight: &[f64], bias: &[f64]) -> Result<Tensor4> {
        self.check(input, weight, bias)?;
        let (h, w, k) = (input.h, input.w, self.kernel);
        let (ph, pw) = (h + 2 * self.pad(), w + 2 * self.pad());
        let (cin_g, cout_g) = (self.in_per_group(), self.out_per_group());
        let mut out = Tensor4::zeros(input.n, self.out_channels, h, w);
        for b in 0..input.n {
            let padded = self.padded_item(input, b);
            for oc in 0..self.out_channels {
                let group = oc / cout_g;
                let dst = out.plane_mut(b, oc);
                dst.fill(bias[oc]);
                for icl in 0..cin_g {
                    let ic = group * cin_g + icl;
                    let src = &padded[ic * ph * pw..(ic + 1) * ph * pw];
                    for ky in 0..k {
                        for kx in 0..k {
                            let wv = weight[((oc * cin_g + icl) * k + ky) * k + kx];
                            for y in 0..h {
                                let s = &src[(y + ky) * pw + kx..(y + ky) * pw + kx + w];
                                let d = &mut dst[y * w..(y + 1) * w];
                                for (d, s) in d.iter_mut().zip(s) {
                                    *d += wv * s;
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Accumulates parameter gradients into `grad_weight` / `grad_bias` and returns
    /// the gradient with respect to `input`.
    pub fn backward(
        &self,
        input: &Tensor4,
        weight: &[f64],
        grad_out: &Tensor4,
        grad_weight: &mut [f64],
        grad_bias: &mut [f64],
    ) -> Result<Tensor4> {
        self.check(input, weight, grad_bias)?;
        grad_out.ensure_shape([input.n, self.out_channels, input.h, input.w], "conv grad")?;
        if grad_weight.len() != weight.len() {
            return Err(Error::shape("gradient buffer length mismatch"));
        }
        let (h, w, k, p) = (input.h, input.w, self.kernel, self.pad());
        let (ph, pw) = (h + 2 * p, w + 2 * p);
        let (cin_g, cout_g) = (self.in_per_group(), self.out_per_group());
        let mut grad_in = Tensor4::zeros(input.n, input.c, h, w);
        for b in 0..input.n {
            let padded = self.padded_item(input, b);
            let mut grad_padded = vec![0.0; input.c * ph * pw];
            for oc in 0..self.out_channels {
                let group = oc / cout_g;
                let g = grad_out.plane(b, oc);
                grad_bias[oc] += g.iter().sum::<f64>();
                for icl in 0..cin_g {
                    let ic = group * cin_g + icl;
                    let src = &padded[ic * ph * pw..(ic + 1) * ph * pw];
                    let gsrc = &mut grad_padded[ic * ph * pw..(ic + 1) * ph * pw];
                    for ky in 0..k {
                        for kx in 0..k {
                            let wi = ((oc * cin_g + icl) * k + ky) * k + kx;
                            let wv = weight[wi];
                            let mut acc = 0.0;
                            for y in 0..h {
                                let off = (y + ky) * pw + kx;
                                let grow = &g[y * w..(y + 1) * w];
                                for (gv, s) in grow.iter().zip(&src[off..off + w]) {
                                    acc += gv * s;
                                }
                                for (gs, gv) in gsrc[off..off + w].iter_mut().zip(grow) {
                                    *gs += wv * gv;
                                }
                            }
                            grad_weight[wi] += acc;
                        }
                    }
                }
            }
            // adjoint of the padding: fold every padded position back onto its source
            for c in 0..input.c {
                let gp = &grad_padded[c * ph * pw..(c + 1) * ph * pw];
                let dst = grad_in.plane_mut(b, c);
                if p == 0 {
                    dst.copy_from_slice(gp);
                    continue;
                }
                for py in 0..ph {
                    let sy = reflect(py as isize - p as isize, h);
                    for px in 0..pw {
                        dst[sy * w + reflect(px as isize - p as isize, w)] += gp[py * pw + px];
                    }
                }
            }
        }
        Ok(grad_in)
    }
}

pub fn relu(input: &Tensor4) -> Tensor4 {
    map(input, |v| v.max(0.0))
}

/// `grad * [out > 0]`, using the activation output.
pub fn relu_backward(output: &Tensor4, grad: &Tensor4) -> Tensor4 {
    zip_map(output, grad, |o, g| if o > 0.0 { g } else { 0.0 })
}

pub fn tanh(input: &Tensor4) -> Tensor4 {
    map(input, f64::tanh)
}

/// `grad * (1 - out^2)`
pub fn tanh_backward(output: &Tensor4, grad: &Tensor4) -> Tensor4 {
    zip_map(output, grad, |o, g| g * (1.0 - o * o))
}

/// Softmax across the channel axis at every pixel.
pub fn softmax_channels(input: &Tensor4) -> Tensor4 {
    let mut out = input.clone();
    let plane = input.plane_len();
    for b in 0..input.n {
        for i in 0..plane {
            let idx = |c: usize| (b * input.c + c) * plane + i;
            let max = (0..input.c)
                .map(|c| input.data[idx(c)])
                .fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for c in 0..input.c {
                let e = (input.data[idx(c)] - max).exp();
                out.data[idx(c)] = e;
                sum += e;
            }
            for c in 0..input.c {
                out.data[idx(c)] /= sum;
            }
        }
    }
    out
}

/// `s * (g - sum_c s_c g_c)` per pixel.
pub fn softmax_backward(output: &Tensor4, grad: &Tensor4) -> Tensor4 {
    let mut out = grad.clone();
    let plane = output.plane_len();
    for b in 0..output.n {
        for i in 0..plane {
            let idx = |c: usize| (b * output.c + c) * plane + i;
            let dot: f64 = (0..output.c)
                .map(|c| output.data[idx(c)] * grad.data[idx(c)])
                .sum();
            for c in 0..output.c {
                out.data[idx(c)] = output.data[idx(c)] * (grad.data[idx(c)] - dot);
            }
        }
    }
    out
}

/// `sum_i W_i * I_i`: `weights` is `[n, N, h, w]`, `frames` is `[n, N*C, h, w]`
/// stacked frame-major, result `[n, C, h, w]`. Weights broadcast over colour.
pub fn weighted_frame_sum(weights: &Tensor4, frames: &Tensor4) -> Result<Tensor4> {
    let (n_frames, ch) = frame_layout(weights, frames)?;
    let mut out = Tensor4::zeros(weights.n, ch, weights.h, weights.w);
    for b in 0..weights.n {
        for i in 0..n_frames {
            let wp = weights.plane(b, i);
            for c in 0..ch {
                let fp = frames.plane(b, i * ch + c);
                let dst = out.plane_mut(b, c);
                for ((d, wv), fv) in dst.iter_mut().zip(wp).zip(fp) {
                    *d += wv * fv;
                }
            }
        }
    }
    Ok(out)
}

/// Gradient of [`weighted_frame_sum`] with respect to the weights.
pub fn weighted_frame_sum_backward(
    weights: &Tensor4,
    frames: &Tensor4,
    grad: &Tensor4,
) -> Result<Tensor4> {
    let (n_frames, ch) = frame_layout(weights, frames)?;
    grad.ensure_shape([weights.n, ch, weights.h, weights.w], "fusion grad")?;
    let mut out = Tensor4::zeros(weights.n, n_frames, weights.h, weights.w);
    for b in 0..weights.n {
        for i in 0..n_frames {
            for c in 0..ch {
                let fp = frames.plane(b, i * ch + c);
                let gp = grad.plane(b, c);
                let dst = out.plane_mut(b, i);
                for ((d, fv), gv) in dst.iter_mut().zip(fp).zip(gp) {
                    *d += fv * gv;
                }
            }
        }
    }
    Ok(out)
}

fn frame_layout(weights: &Tensor4, frames: &Tensor4) -> Result<(usize, usize)> {
    let n_frames = weights.c;
    if frames.n != weights.n
        || frames.h != weights.h
        || frames.w != weights.w
        || frames.c % n_frames != 0
    {
        return Err(Error::shape(format!(
            "weights {:?} do not match frames {:?}",
            weights.dims(),
            frames.dims()
        )));
    }
    Ok((n_frames, frames.c / n_frames))
}

/// Elementwise sum of two equally shaped tensors.
pub fn add(a: &Tensor4, b: &Tensor4) -> Result<Tensor4> {
    if !a.same_shape(b) {
        return Err(Error::shape(format!("add {:?} + {:?}", a.dims(), b.dims())));
    }
    Ok(zip_map(a, b, |x, y| x + y))
}

fn map(t: &Tensor4, f: impl Fn(f64) -> f64) -> Tensor4 {
    Tensor4 {
        data: t.data.iter().map(|&v| f(v)).collect(),
        ..*t
    }
}

fn zip_map(a: &Tensor4, b: &Tensor4, f: impl Fn(f64, f64) -> f64) -> Tensor4 {
    debug_assert!(a.same_shape(b));
    Tensor4 {
        data: a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect(),
        ..*a
    }
}
