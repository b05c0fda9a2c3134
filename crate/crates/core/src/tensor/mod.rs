//! Dense matrices, a reverse-mode tape, and a finite-difference checker.

pub mod checkpoint;
mod gradcheck;
mod matrix;
mod tape;

use thiserror::Error;

pub use gradcheck::{grad_check, GradCheck};
pub use matrix::Matrix;
pub use tape::{softmax_rows, Function, Gradients, Tape, Var, LOG_CLAMP};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TensorError {
    #[error("{op}: shape mismatch {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("matrix data length {len} does not match {rows}x{cols}")]
    DataLength { rows: usize, cols: usize, len: usize },
    #[error("{op}: empty input")]
    Empty { op: &'static str },
    #[error("{op}: index {index} out of range for {len} rows")]
    IndexOutOfRange {
        op: &'static str,
        index: usize,
        len: usize,
    },
    #[error("{op}: produced a non-finite value")]
    NonFinite { op: &'static str },
    #[error("operator `{0}` was not prepared for this graph")]
    MissingOperator(&'static str),
    #[error("{op}: non-finite gradient")]
    NonFiniteGradient { op: &'static str },
}
