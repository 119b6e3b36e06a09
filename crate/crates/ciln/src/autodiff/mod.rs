//! Dense tensors with reverse-mode differentiation.
//!
//! A deliberately small engine: it covers exactly the operations the light
//! field network needs (2D convolution, batched affine maps, relu, channel
//! concatenation, align-corners bilinear resizing, elementwise sums,
//! forward differences, a mean absolute error reduction) plus an Adam
//! optimizer. Graphs are built per forward pass; parameters live outside
//! the graph and are bound as leaves each pass.

mod adam;
mod graph;
pub(crate) mod kernels;
mod tensor;

pub use adam::AdamState;
pub use graph::{Graph, NodeId};
pub use tensor::{Scalar, Tensor};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("{op}: shape mismatch: {details}")]
    ShapeMismatch { op: &'static str, details: String },
    #[error("{op}: {details}")]
    InvalidArgument { op: &'static str, details: String },
    #[error("backward requires a scalar loss, got shape {shape:?}")]
    NonScalarLoss { shape: Vec<usize> },
    #[error("parameter {index} has no gradient")]
    MissingGrad { index: usize },
}
