//! Minimal dense numeric substrate: tensors, a reverse-mode tape,
//! the adam optimizer, and closed-form least squares.
//!
//! Everything is `f64`, row-major, and single-threaded; the models are
//! tiny and bit-exact reproducibility matters more than speed here.

mod adam;
mod graph;
mod lstsq;
mod tensor;

pub use adam::AdamState;
pub use graph::{Graph, NodeId};
pub use lstsq::{solve_least_squares, Ridge};
pub use tensor::Tensor;

use thiserror::Error;

/// Errors raised by the numeric substrate.
#[derive(Debug, Clone, Error)]
pub enum NumError {
    #[error("dimension mismatch: {context}: {left:?} vs {right:?}")]
    DimensionMismatch {
        context: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("backward requires a scalar loss node, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("matrix is singular or rank-deficient (pivot {pivot:.3e} at column {column})")]
    SingularMatrix { pivot: f64, column: usize },
    #[error("non-finite value produced in {0}")]
    NonFinite(&'static str),
}
