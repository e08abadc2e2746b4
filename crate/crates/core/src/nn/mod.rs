//! Minimal tensor and layer engine: forward/backward for the layer kinds the
//! residual network uses, softmax cross-entropy and momentum SGD.

pub mod checkpoint;
pub mod layers;
pub mod loss;
pub mod sgd;
pub mod tensor;

pub use layers::{
    add_shortcut, AvgPool2d, BatchNorm2d, BatchNormState, Conv2d, GlobalAvgPool, Layer, LayerKind,
    LayerSpec, Linear, Mode, Param, Relu,
};
pub use loss::{argmax_rows, softmax_cross_entropy};
pub use sgd::{sgd_step, SgdConfig};
pub use tensor::Tensor;
