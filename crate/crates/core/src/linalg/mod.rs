//! Dense and sparse matrices with 2×2 block access, the matrix exponential and
//! the integral-of-exponential matrices used by discretization, incremental
//! matrix powers, and the action of the exponential on vectors.
//!
//! Blocks follow one fixed convention throughout the crate: block `i` covers the
//! indices `2i..min(2i + 2, n)`, so an odd dimension ends with a single-index
//! block.

mod block;
mod csr;
mod expm;
mod krylov;
mod mtx;
mod operator;
mod powers;

pub use block::{Block2, BlockMatrix, Storage};
pub use csr::CsrMatrix;
pub use expm::{check_step, discretization_matrices, exp_matrix, expm_dense, DiscretizationMatrices};
pub use krylov::{exp_action, exp_action_with, KrylovOptions};
pub use mtx::{format_matrix_market, parse_matrix_market, read_matrix_market};
pub use operator::{
    DenseOperator, ExpOperator, LinearOperator, PhiOperator, Projection, Scaling,
};
pub use powers::{MatrixPowers, SPARSE_DENSITY_LIMIT};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("non-finite entry encountered in {0}")]
    NonFinite(&'static str),
    #[error("matrix power became non-finite at step {0}")]
    NonFinitePower(usize),
    #[error("time step must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("singular system while evaluating the Padé approximant")]
    Singular,
    #[error("Krylov exponential action did not reach tolerance {tol:e} within {budget} substeps (reached t = {reached} of {target})")]
    KrylovBudget {
        tol: f64,
        budget: usize,
        reached: f64,
        target: f64,
    },
    #[error("index ({row}, {col}) out of range for a {rows}x{cols} matrix")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },
    #[error("MatrixMarket line {line}: {message}")]
    MatrixMarket { line: usize, message: String },
    #[error("I/O error reading {path}: {message}")]
    Io { path: String, message: String },
}

impl LinalgError {
    /// Short machine-readable tag for the error.
    pub fn kind(&self) -> &'static str {
        match self {
            LinalgError::DimensionMismatch { .. } => "dimension",
            LinalgError::NotSquare { .. } => "not_square",
            LinalgError::NonFinite(_) | LinalgError::NonFinitePower(_) => "non_finite",
            LinalgError::InvalidStep(_) => "invalid_step",
            LinalgError::Singular => "singular",
            LinalgError::KrylovBudget { .. } => "krylov_budget",
            LinalgError::IndexOutOfRange { .. } => "index",
            LinalgError::MatrixMarket { .. } => "matrix_market",
            LinalgError::Io { .. } => "io",
        }
    }

    /// Whether the error comes from malformed input rather than arithmetic.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            LinalgError::DimensionMismatch { .. }
                | LinalgError::NotSquare { .. }
                | LinalgError::InvalidStep(_)
                | LinalgError::IndexOutOfRange { .. }
                | LinalgError::MatrixMarket { .. }
                | LinalgError::Io { .. }
        )
    }
}

/// Number of blocks for dimension `n`.
#[inline]
pub fn block_count(n: usize) -> usize {
    n.div_ceil(2)
}

/// Index range covered by block `i` in dimension `n`.
#[inline]
pub fn block_range(i: usize, n: usize) -> std::ops::Range<usize> {
    let start = 2 * i;
    start..(start + 2).min(n)
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm2(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}
