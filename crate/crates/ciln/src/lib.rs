//! Conditional implicit light field networks.
//!
//! Given a sparse set of views from a narrow-baseline 4D light field, a
//! convolutional feature extractor produces a per-pixel latent grid; an
//! implicit decoder conditioned on those features returns scene radiance
//! at continuous spatio-angular query coordinates. One trained model can
//! therefore synthesize views at flexible spatial and angular resolutions,
//! and can be trained to tolerate downsampled or partially missing inputs.
//!
//! The crate also ships the supporting machinery: a small reverse-mode
//! tensor engine, light field I/O and synthetic scene generation,
//! degradation operators, the training loop, quality metrics, and a thin
//! command line front end. See the `examples/` directory for runnable
//! walkthroughs of each capability.

pub mod autodiff;
pub mod rng;
pub mod runtime;

pub use autodiff::{AdamState, Graph, NodeId, Scalar, Tensor, TensorError};
