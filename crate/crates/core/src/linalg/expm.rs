//! Matrix exponential and the discretization integrals built on it.

use nalgebra::DMatrix;

use super::{BlockMatrix, LinalgError};

/// `e^A` for a dense square matrix, by Padé scaling and squaring.
pub fn expm_dense(a: &DMatrix<f64>) -> Result<DMatrix<f64>, LinalgError> {
    if a.nrows() != a.ncols() {
        return Err(LinalgError::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(LinalgError::NonFinite("exponential input"));
    }
    if a.nrows() == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let result = a.exp();
    if result.iter().any(|v| !v.is_finite()) {
        return Err(LinalgError::NonFinite("matrix exponential"));
    }
    Ok(result)
}

/// `e^{Aδ}` as a dense block matrix.
pub fn exp_matrix(a: &BlockMatrix, delta: f64) -> Result<BlockMatrix, LinalgError> {
    check_step(delta)?;
    if !a.is_square() {
        return Err(LinalgError::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    Ok(BlockMatrix::dense(expm_dense(&(a.to_dense() * delta))?))
}

/// Rejects time steps that are not positive and finite.
pub fn check_step(delta: f64) -> Result<(), LinalgError> {
    if delta > 0.0 && delta.is_finite() {
        Ok(())
    } else {
        Err(LinalgError::InvalidStep(delta))
    }
}

/// `Φ = e^{Aδ}` together with `Φ₁ = Σ δ^{i+1}/(i+1)! Aⁱ` and
/// `Φ₂ = Σ δ^{i+2}/(i+2)! Aⁱ`.
#[derive(Clone, Debug)]
pub struct DiscretizationMatrices {
    pub phi: BlockMatrix,
    pub phi1: BlockMatrix,
    pub phi2: BlockMatrix,
}

/// Computes `Φ`, `Φ₁` and `Φ₂` from one exponential of the block-triangular
/// matrix `[[A, I, 0], [0, 0, I], [0, 0, 0]]·δ`, whose top block row is
/// `[Φ, Φ₁, Φ₂]`.
pub fn discretization_matrices(
    a: &BlockMatrix,
    delta: f64,
) -> Result<DiscretizationMatrices, LinalgError> {
    check_step(delta)?;
    if !a.is_square() {
        return Err(LinalgError::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    let n = a.nrows();
    let mut aug = DMatrix::<f64>::zeros(3 * n, 3 * n);
    aug.view_mut((0, 0), (n, n)).copy_from(&(a.to_dense() * delta));
    for i in 0..n {
        aug[(i, n + i)] = delta;
        aug[(n + i, 2 * n + i)] = delta;
    }
    let e = expm_dense(&aug)?;
    Ok(DiscretizationMatrices {
        phi: BlockMatrix::dense(e.view((0, 0), (n, n)).into_owned()),
        phi1: BlockMatrix::dense(e.view((0, n), (n, n)).into_owned()),
        phi2: BlockMatrix::dense(e.view((0, 2 * n), (n, n)).into_owned()),
    })
}
