//! A small convolutional network built from scratch.
//!
//! Layers are free functions over a dense [`Tensor`]; a declarative
//! [`NetworkSpec`] chains them, checked by shape propagation. Training is
//! plain seeded SGD and every backward pass is verifiable against central
//! finite differences through [`gradient_check`].
//!
//! All math is generic over [`Real`] (`f32` or `f64`); the pipeline runs it
//! at `f64` via the crate-root [`crate::Scalar`] alias.

mod arch;
mod gradcheck;
mod io;
mod layers;
mod network;
mod tensor;
mod train;

pub use arch::{tiny_vgg, vgg16_descriptor};
pub use gradcheck::{gradient_check, gradient_check_with_fault, BackwardFault};
pub use io::{load_params, read_loss_trace, save_params, spec_fingerprint, write_loss_trace};
pub use layers::{
    conv2d_backward, conv2d_forward, fully_connected_backward, fully_connected_forward,
    maxpool2_backward, maxpool2_forward, relu_backward, relu_forward, softmax,
    softmax_cross_entropy, zero_pad_backward, zero_pad_forward, Gradients,
};
pub use network::{
    count_params, forward_logits, loss_and_gradients, predict, propagate_shapes, sample_loss,
    LayerParams, LayerSpec, NetworkParams, NetworkSpec,
};
pub use tensor::Tensor;
pub use train::{evaluate_classifier, train_classifier, Hyperparams, Sample, TrainedModel};

use thiserror::Error;

/// Scalar the network math is generic over; implemented for `f32` and `f64`.
pub trait Real:
    num_traits::Float
    + num_traits::FromPrimitive
    + std::ops::AddAssign
    + std::ops::SubAssign
    + std::ops::MulAssign
    + std::ops::DivAssign
    + std::iter::Sum
    + std::fmt::Debug
    + std::fmt::Display
    + Send
    + Sync
    + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Converts an `f64` constant into the working scalar.
#[inline]
pub(crate) fn real<F: Real>(x: f64) -> F {
    F::from_f64(x).expect("constant representable in scalar type")
}

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("class index {index} out of range for {classes} classes")]
    ClassOutOfRange { index: usize, classes: usize },
    #[error("training diverged (non-finite loss) at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("epsilon {0} outside supported range (1e-7, 1e-3)")]
    InvalidEpsilon(f64),
    #[error("model file: {0}")]
    BadModelFile(String),
    #[error("model fingerprint does not match the expected architecture")]
    FingerprintMismatch,
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
