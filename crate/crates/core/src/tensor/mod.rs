//! Dense tensors and a reverse-mode autodiff tape.
//!
//! Values live in [`Tensor`]s; differentiable computations are recorded on a
//! [`Tape`] as they execute and are addressed through copyable [`Var`]
//! handles. Calling [`Tape::backward`] on a scalar walks the record in reverse
//! and leaves gradients on every node that requires one.

mod activation;
mod dense;
mod gradcheck;
mod tape;

pub use activation::Activation;
pub use dense::{Mask, Tensor};
pub use gradcheck::{grad_check, GradCheckReport};
pub use tape::{Tape, Var};

pub(crate) use dense::{matmul_into, matmul_nt_into, matmul_tn_into};

/// Element type of every tensor.
#[cfg(not(feature = "f32"))]
pub type Float = f64;
/// Element type of every tensor.
#[cfg(feature = "f32")]
pub type Float = f32;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("shape {shape:?} does not match buffer length {len}")]
    LengthMismatch { shape: Vec<usize>, len: usize },
    #[error("invalid shape {0:?}: dimensions must be positive")]
    InvalidShape(Vec<usize>),
    #[error("expected a matrix, got shape {0:?}")]
    NotMatrix(Vec<usize>),
    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },
    #[error("backward requires a scalar loss, got shape {0:?}")]
    NotScalar(Vec<usize>),
    #[error("backward already ran on this tape; call zero_grad first")]
    BackwardTwice,
    #[error("softmax row {row} has every entry masked")]
    FullyMasked { row: usize },
    #[error("{0}")]
    Invalid(String),
}
