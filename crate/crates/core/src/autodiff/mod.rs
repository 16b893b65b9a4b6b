//! Tape-based reverse-mode automatic differentiation over f64 scalars and
//! dense vectors.
//!
//! Operations are recorded eagerly on a [`Tape`] (a Wengert list); a single
//! reverse sweep over the tape computes the adjoint of every node with
//! respect to a scalar root. Node ids are dense and strictly increasing in
//! recording order, so the tape is already topologically sorted and the
//! backward pass is one loop in decreasing id order.

mod grad_check;
mod tape;

pub use grad_check::{grad_check, CoordCheck, GradCheckReport};
pub use tape::{ConstMatrix, Gradients, Shape, Tape, Var};

use thiserror::Error;

/// Errors raised while recording on a tape or sweeping it backward.
#[derive(Debug, Error)]
pub enum AutodiffError {
    #[error("shape mismatch in `{op}`: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Shape,
        rhs: Shape,
    },
    #[error("operands belong to different tapes")]
    CrossTape,
    #[error("backward root must be scalar, got {0:?}")]
    NonScalarRoot(Shape),
    #[error("slice [{start}, {end}) out of bounds for vector of length {len}")]
    SliceOutOfBounds {
        start: usize,
        end: usize,
        len: usize,
    },
    #[error("concat requires at least one operand")]
    EmptyConcat,
    #[error("matrix of {rows}x{cols} cannot multiply vector of length {len}")]
    MatVecMismatch {
        rows: usize,
        cols: usize,
        len: usize,
    },
    #[error("non-finite forward value at {probe}")]
    NonFinite { probe: String },
}

pub type Result<T> = std::result::Result<T, AutodiffError>;
