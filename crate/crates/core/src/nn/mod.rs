//! Minimal neural-network core: tensors, layers with explicit backward
//! passes, recurrent cells with BPTT, losses and the Adam optimiser.
//!
//! Values are computed in f64; parameters are kept on the f32 grid.

pub mod adam;
pub(crate) mod gemm;
pub mod gradcheck;
pub mod init;
pub mod layers;
pub mod loss;
pub mod recurrent;
mod tensor;

pub use adam::{Adam, AdamConfig};
pub use layers::{Activation, ActivationKind, AvgPool, Conv1d, Conv2d, Dense, Layer, LayerKind, MaxPool2d};
pub use loss::{softmax, softmax_ce};
pub use recurrent::{Gru, Lstm};
pub use tensor::Tensor;
