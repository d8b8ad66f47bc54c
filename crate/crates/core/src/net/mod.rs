//! The trainable guidance network and its small, closed layer vocabulary.

pub mod layers;
mod model;
mod network;
mod tensor;

pub use layers::Conv2d;
pub use model::{
    ModelParams, NetConfig, DEB_LAYERS, DEB_WIDTH, LAYER_COUNT, MODEL_MAGIC, MODEL_VERSION,
    SGEB_LAYERS, TGEB_LAYERS,
};
pub use network::{
    count_params_flops, deb_forward, forward, sgeb_forward, tgeb_forward, Cost, ForwardOutput,
    Gradients, GuidanceNet, Tape,
};
pub use tensor::{Tensor4, VOXEL_INPUT_SCALE};
