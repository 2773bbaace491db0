//! Reference computations used to check the decomposed engine: a lazy
//! non-decomposed evaluation of the recurrence, Hausdorff estimates from
//! support samples, analytic decomposition-error bounds and trajectory
//! simulation.

mod bounds;
mod directions;
mod hausdorff;
mod nondecomposed;
mod simulate;

pub use bounds::{
    block_diameter, column_block_alphas, decomposed_map_error_bound, decomposition_error_upper,
    recurrence_error_bound, ColumnBlockNorms, DecompositionErrorReport,
};
pub use directions::{axis_directions, normalize, sample_directions};
pub use hausdorff::{hausdorff_estimate, hausdorff_from_samples, support_gap_tolerance};
pub use nondecomposed::{nondecomposed_set, reach_nondecomposed, recursive_set, PowerOperator};
pub use simulate::{
    membership_directions, simulate_continuous, simulate_recurrence, simulate_system, Trajectory,
};

use thiserror::Error;

use crate::discretize::DiscretizeError;
use crate::linalg::LinalgError;
use crate::reach::ReachError;
use crate::sets::SetError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("direction set is empty")]
    NoDirections,
    #[error("direction {index} has dimension {found}, expected {expected}")]
    DirectionDimension {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("containment violated in direction {index}: gap {gap:e}")]
    ContainmentViolation { index: usize, gap: f64 },
    #[error("sample lists differ in length: {left} vs {right}")]
    SampleMismatch { left: usize, right: usize },
    #[error("{what} outside its set at step {step}")]
    OutsideSet { what: &'static str, step: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("integration failed: {0}")]
    Integration(String),
    #[error(transparent)]
    Set(#[from] SetError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Discretize(#[from] DiscretizeError),
    #[error(transparent)]
    Reach(#[from] ReachError),
}

impl OracleError {
    pub fn kind(&self) -> &'static str {
        match self {
            OracleError::NoDirections => "no_directions",
            OracleError::DirectionDimension { .. } => "dimension",
            OracleError::ContainmentViolation { .. } => "containment",
            OracleError::SampleMismatch { .. } => "sample_mismatch",
            OracleError::OutsideSet { .. } => "outside_set",
            OracleError::InvalidArgument(_) => "invalid_argument",
            OracleError::Integration(_) => "integration",
            OracleError::Set(e) => e.kind(),
            OracleError::Linalg(e) => e.kind(),
            OracleError::Discretize(e) => e.kind(),
            OracleError::Reach(e) => e.kind(),
        }
    }
}

fn check_directions(dirs: &[Vec<f64>], n: usize) -> Result<(), OracleError> {
    if dirs.is_empty() {
        return Err(OracleError::NoDirections);
    }
    if let Some((index, d)) = dirs.iter().enumerate().find(|(_, d)| d.len() != n) {
        return Err(OracleError::DirectionDimension {
            index,
            expected: n,
            found: d.len(),
        });
    }
    Ok(())
}
