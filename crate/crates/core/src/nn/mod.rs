//! Minimal differentiable engine: 1-D convolution, dense layers, ReLU,
//! softmax/cross-entropy and Adam. Everything runs in `f64` and in a fixed
//! evaluation order, so results are bit-reproducible.

mod activation;
mod adam;
mod layers;
mod params;
mod tensor;

pub use activation::{cross_entropy, relu, relu_backward, relu_in_place, softmax, softmax_cross_entropy_grad, PROB_FLOOR};
pub use adam::{adam_step, AdamConfig, AdamState};
pub(crate) use layers::fill_normal;
pub use layers::{init_params, Conv1d, Dense, Layer, LayerSpec, INIT_STD};
pub use params::Params;
pub use tensor::Tensor;
