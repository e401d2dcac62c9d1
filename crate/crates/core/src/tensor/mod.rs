//! Dense f64 matrices with define-by-run reverse-mode differentiation.
//!
//! Every forward operation on a [`Tape`] appends a node holding its value and
//! its parents. [`Tape::backward`] sweeps the nodes in reverse and returns
//! gradients for every node, including leaf inputs (which is what atom
//! importance needs). Optimizers live with the models, not here.

pub mod container;
mod dense;
pub mod gradcheck;
mod nn;
mod param;
mod tape;

use thiserror::Error;

pub use dense::Tensor;
pub use nn::{dropout, dropout_mask, glorot_uniform, gru_cell, linear, GruIndices, GruVars};
pub use param::{ParamSet, Parameter};
pub use tape::{Gradients, Tape, Var};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TensorError {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("backward root must be 1x1, got {rows}x{cols}")]
    NonScalarRoot { rows: usize, cols: usize },
    #[error("segment ids must cover 0..S without gaps")]
    NonContiguousSegments,
    #[error("expected {expected} values, found {found}")]
    InvalidLength { expected: usize, found: usize },
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },
}

impl TensorError {
    pub(crate) fn shape(op: &'static str, a: &Tensor, b: &Tensor) -> Self {
        TensorError::ShapeMismatch {
            op,
            left: a.shape(),
            right: b.shape(),
        }
    }
}
