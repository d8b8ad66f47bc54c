//! Forward and reverse passes of the full guidance network:
//! spatial block, temporal block, weighted fusion, detail refinement.

use super::layers::{
    relu, relu_backward, softmax_backward, softmax_channels, tanh, tanh_backward,
    weighted_frame_sum, weighted_frame_sum_backward,
};
use super::model::{ModelParams, NetConfig, DEB_LAYERS, SGEB_LAYERS, TGEB_LAYERS};
use super::tensor::Tensor4;
use crate::error::{Error, Result};

fn conv(params: &ModelParams, layer: usize, input: &Tensor4) -> Result<Tensor4> {
    params.config().layers()[layer].forward(input, &params.weights[layer], &params.biases[layer])
}

fn conv_backward(
    params: &ModelParams,
    grads: &mut ModelParams,
    layer: usize,
    input: &Tensor4,
    grad_out: &Tensor4,
) -> Result<Tensor4> {
    let (gw, gb) = (&mut grads.weights[layer], &mut grads.biases[layer]);
    params.config().layers()[layer].backward(input, &params.weights[layer], grad_out, gw, gb)
}

/// Spatial block: three rounds of depthwise 3x3, pointwise 1x1, ReLU. `B -> B` channels.
pub fn sgeb_forward(voxel: &Tensor4, params: &ModelParams) -> Result<Tensor4> {
    Ok(sgeb_recorded(voxel, params)?.features().clone())
}

/// Temporal block: pointwise `B -> B/2 -> B/4 -> N` with ReLU between, then a
/// softmax over the `N` frames at each pixel.
pub fn tgeb_forward(features: &Tensor4, params: &ModelParams) -> Result<Tensor4> {
    Ok(tgeb_recorded(features, params)?.weights)
}

/// Detail block residual: 3x3 convs `C -> 16 -> 16 -> C`, ReLU between, tanh output.
/// The caller adds it to the fused image.
pub fn deb_forward(fused: &Tensor4, params: &ModelParams) -> Result<Tensor4> {
    Ok(deb_recorded(fused, params)?.residual)
}

struct SgebRecord {
    /// Block inputs; `inputs[0]` is the voxel.
    inputs: Vec<Tensor4>,
    depthwise: Vec<Tensor4>,
    activations: Vec<Tensor4>,
}

impl SgebRecord {
    fn features(&self) -> &Tensor4 {
        self.activations.last().expect("three blocks")
    }
}

fn sgeb_recorded(voxel: &Tensor4, params: &ModelParams) -> Result<SgebRecord> {
    let config = params.config();
    if voxel.c != config.bins {
        return Err(Error::shape(format!(
            "voxel has {} bins, model expects {}",
            voxel.c, config.bins
        )));
    }
    let mut rec = SgebRecord {
        inputs: Vec::with_capacity(3),
        depthwise: Vec::with_capacity(3),
        activations: Vec::with_capacity(3),
    };
    let mut x = voxel.clone();
    for block in 0..3 {
        let layer = SGEB_LAYERS.start + 2 * block;
        let d = conv(params, layer, &x)?;
        let a = relu(&conv(params, layer + 1, &d)?);
        rec.inputs.push(x);
        rec.depthwise.push(d);
        x = a.clone();
        rec.activations.push(a);
    }
    Ok(rec)
}

struct TgebRecord {
    hidden: [Tensor4; 2],
    weights: Tensor4,
}

fn tgeb_recorded(features: &Tensor4, params: &ModelParams) -> Result<TgebRecord> {
    let l = TGEB_LAYERS.start;
    let h1 = relu(&conv(params, l, features)?);
    let h2 = relu(&conv(params, l + 1, &h1)?);
    let weights = softmax_channels(&conv(params, l + 2, &h2)?);
    Ok(TgebRecord {
        hidden: [h1, h2],
        weights,
    })
}

struct DebRecord {
    hidden: [Tensor4; 2],
    residual: Tensor4,
}

fn deb_recorded(fused: &Tensor4, params: &ModelParams) -> Result<DebRecord> {
    let config = params.config();
    if fused.c != config.channels {
        return Err(Error::shape(format!(
            "fused image has {} channels, model expects {}",
            fused.c, config.channels
        )));
    }
    let l = DEB_LAYERS.start;
    let h1 = relu(&conv(params, l, fused)?);
    let h2 = relu(&conv(params, l + 1, &h1)?);
    let residual = tanh(&conv(params, l + 2, &h2)?);
    Ok(DebRecord {
        hidden: [h1, h2],
        residual,
    })
}

/// Intermediates of one forward pass, enough to run the reverse pass.
pub struct Tape {
    sgeb: SgebRecord,
    tgeb: TgebRecord,
    frames: Tensor4,
    fused: Tensor4,
    deb: DebRecord,
    /// `fused + residual` before clamping.
    combined: Tensor4,
}

/// Everything a forward pass produces.
pub struct ForwardOutput {
    /// Per-pixel fusion weights `[n, N, h, w]`.
    pub weights: Tensor4,
    pub fused: Tensor4,
    /// Final image, `fused + residual` clamped to `[0, 1]`.
    pub output: Tensor4,
}

/// Gradients of a scalar objective.
pub struct Gradients {
    pub params: ModelParams,
    pub voxel: Tensor4,
}

/// Full pipeline on a batch: `voxel` is `[n, B, h, w]`, `frames` `[n, N*C, h, w]`.
pub fn forward(
    params: &ModelParams,
    voxel: &Tensor4,
    frames: &Tensor4,
) -> Result<(ForwardOutput, Tape)> {
    let config = params.config();
    frames.ensure_shape(
        [voxel.n, config.frames * config.channels, voxel.h, voxel.w],
        "frame stack",
    )?;
    let sgeb = sgeb_recorded(voxel, params)?;
    let tgeb = tgeb_recorded(sgeb.features(), params)?;
    let fused = weighted_frame_sum(&tgeb.weights, frames)?;
    let deb = deb_recorded(&fused, params)?;
    let combined = super::layers::add(&fused, &deb.residual)?;
    let output = Tensor4 {
        data: combined.data.iter().map(|v| v.clamp(0.0, 1.0)).collect(),
        ..combined.clone()
    };
    let out = ForwardOutput {
        weights: tgeb.weights.clone(),
        fused: fused.clone(),
        output,
    };
    let tape = Tape {
        sgeb,
        tgeb,
        frames: frames.clone(),
        fused,
        deb,
        combined,
    };
    Ok((out, tape))
}

impl Tape {
    /// Reverse pass for `d objective / d output`.
    pub fn backward(&self, params: &ModelParams, grad_output: &Tensor4) -> Result<Gradients> {
        grad_output.ensure_shape(self.combined.dims(), "output gradient")?;
        let mut grads = params.zeros_like();

        // clamp passes gradient only inside [0, 1]
        let grad_combined = Tensor4 {
            data: self
                .combined
                .data
                .iter()
                .zip(&grad_output.data)
                .map(|(s, g)| if (0.0..=1.0).contains(s) { *g } else { 0.0 })
                .collect(),
            ..grad_output.clone()
        };

        // detail block
        let l = DEB_LAYERS.start;
        let g = tanh_backward(&self.deb.residual, &grad_combined);
        let g = conv_backward(params, &mut grads, l + 2, &self.deb.hidden[1], &g)?;
        let g = relu_backward(&self.deb.hidden[1], &g);
        let g = conv_backward(params, &mut grads, l + 1, &self.deb.hidden[0], &g)?;
        let g = relu_backward(&self.deb.hidden[0], &g);
        let g_fused_deb = conv_backward(params, &mut grads, l, &self.fused, &g)?;
        let grad_fused = super::layers::add(&grad_combined, &g_fused_deb)?;

        // fusion and temporal block
        let g = weighted_frame_sum_backward(&self.tgeb.weights, &self.frames, &grad_fused)?;
        let g = softmax_backward(&self.tgeb.weights, &g);
        let l = TGEB_LAYERS.start;
        let g = conv_backward(params, &mut grads, l + 2, &self.tgeb.hidden[1], &g)?;
        let g = relu_backward(&self.tgeb.hidden[1], &g);
        let g = conv_backward(params, &mut grads, l + 1, &self.tgeb.hidden[0], &g)?;
        let g = relu_backward(&self.tgeb.hidden[0], &g);
        let mut g = conv_backward(params, &mut grads, l, self.sgeb.features(), &g)?;

        // spatial block
        for block in (0..3).rev() {
            let layer = SGEB_LAYERS.start + 2 * block;
            let gp = relu_backward(&self.sgeb.activations[block], &g);
            let gd = conv_backward(params, &mut grads, layer + 1, &self.sgeb.depthwise[block], &gp)?;
            g = conv_backward(params, &mut grads, layer, &self.sgeb.inputs[block], &gd)?;
        }
        Ok(Gradients {
            params: grads,
            voxel: g,
        })
    }
}

/// Stateful wrapper: `forward` records, `backward` consumes the recording.
pub struct GuidanceNet {
    pub params: ModelParams,
    tape: Option<Tape>,
}

impl GuidanceNet {
    pub fn new(params: ModelParams) -> Self {
        Self { params, tape: None }
    }

    pub fn forward(&mut self, voxel: &Tensor4, frames: &Tensor4) -> Result<ForwardOutput> {
        let (out, tape) = forward(&self.params, voxel, frames)?;
        self.tape = Some(tape);
        Ok(out)
    }

    pub fn backward(&mut self, grad_output: &Tensor4) -> Result<Gradients> {
        let tape = self
            .tape
            .take()
            .ok_or_else(|| Error::State("backward called without a recorded forward pass".into()))?;
        tape.backward(&self.params, grad_output)
    }
}

/// Analytic parameter and FLOP totals for a `height x width` input.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub struct Cost {
    pub params: usize,
    pub flops: u64,
}

pub fn count_params_flops(config: NetConfig, height: usize, width: usize) -> Result<Cost> {
    config.validate()?;
    let layers = config.layers();
    Ok(Cost {
        params: layers.iter().map(|l| l.param_count()).sum(),
        flops: layers.iter().map(|l| l.flops(height, width)).sum(),
    })
}
