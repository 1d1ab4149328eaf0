//! Dense 2-D tensors with a tape-based reverse-mode differentiator, an Adam
//! optimizer and a central-difference gradient checker.
//!
//! Every model in this crate builds a fresh [`Graph`] per forward pass. Values
//! default to `f32`; the same graphs are instantiated at `f64` for gradient
//! checking.

mod adam;
mod gradcheck;
mod graph;
mod real;
mod rng;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::{grad_check, relative_error};
pub use graph::{bce_value, sigmoid, softmax_rows, Axis, Elementwise, Graph, Var};
pub use real::{cast, Real};
pub use rng::{bag_seed, rng_for, stream, Rng};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("dimension mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },
    #[error("tensor of shape {rows}x{cols} needs {expected} values, got {actual}")]
    Length {
        rows: usize,
        cols: usize,
        expected: usize,
        actual: usize,
    },
    #[error("tensor dimensions must be at least 1, got {rows}x{cols}")]
    EmptyShape { rows: usize, cols: usize },
    #[error("domain error in {op}: input {value} outside the admissible range")]
    Domain { op: &'static str, value: f64 },
    #[error("index ({row}, {col}) out of bounds for shape {shape:?}")]
    Index {
        row: usize,
        col: usize,
        shape: (usize, usize),
    },
    #[error("backward root must be a 1x1 scalar, got shape {0:?}")]
    NonScalarRoot((usize, usize)),
    #[error("binary label must be 0 or 1, got {0}")]
    Label(f64),
    #[error("invalid variable handle {0}")]
    UnknownVar(usize),
}

pub type Result<T, E = TensorError> = std::result::Result<T, E>;
