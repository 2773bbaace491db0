use super::{BlockMatrix, LinalgError};

/// Block density above which sparse powers are converted to dense storage.
pub const SPARSE_DENSITY_LIMIT: f64 = 0.25;

/// Incrementally maintained powers `P = Φ^{k-1}` and `Q = Φ^k`.
///
/// Sparse inputs stay sparse until the nonzero-block density of `Q` exceeds
/// [`SPARSE_DENSITY_LIMIT`], after which both `Q` and `Φ` switch to dense.
#[derive(Clone, Debug)]
pub struct MatrixPowers {
    phi: BlockMatrix,
    p: BlockMatrix,
    q: BlockMatrix,
    k: usize,
}

impl MatrixPowers {
    pub fn new(phi: BlockMatrix) -> Result<Self, LinalgError> {
        if !phi.is_square() {
            return Err(LinalgError::NotSquare {
                rows: phi.nrows(),
                cols: phi.ncols(),
            });
        }
        let n = phi.nrows();
        let p = if phi.is_sparse() {
            BlockMatrix::sparse_identity(n)
        } else {
            BlockMatrix::identity(n)
        };
        Ok(MatrixPowers {
            q: phi.clone(),
            phi,
            p,
            k: 0,
        })
    }

    /// `P ← Q; Q ← Q·Φ`.
    pub fn advance(&mut self) -> Result<(), LinalgError> {
        let next = self.q.matmul(&self.phi)?;
        if !next.is_finite() {
            return Err(LinalgError::NonFinitePower(self.k + 2));
        }
        let next = if next.is_sparse() && next.block_density() > SPARSE_DENSITY_LIMIT {
            if self.phi.is_sparse() {
                self.phi = self.phi.clone().into_dense();
            }
            next.into_dense()
        } else {
            next
        };
        self.p = std::mem::replace(&mut self.q, next);
        self.k += 1;
        Ok(())
    }

    /// Number of advances performed: `P = Φ^k`, `Q = Φ^{k+1}`.
    pub fn steps(&self) -> usize {
        self.k
    }

    pub fn p(&self) -> &BlockMatrix {
        &self.p
    }

    pub fn q(&self) -> &BlockMatrix {
        &self.q
    }

    pub fn phi(&self) -> &BlockMatrix {
        &self.phi
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CsrMatrix;
    use nalgebra::DMatrix;

    #[test]
    fn identity_is_fixed() {
        let mut pw = MatrixPowers::new(BlockMatrix::identity(3)).unwrap();
        for _ in 0..5 {
            pw.advance().unwrap();
            assert_eq!(pw.p().to_dense(), DMatrix::identity(3, 3));
            assert_eq!(pw.q().to_dense(), DMatrix::identity(3, 3));
        }
    }

    #[test]
    fn diagonal_powers() {
        let phi = BlockMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 3.0]);
        let mut pw = MatrixPowers::new(phi).unwrap();
        for _ in 0..3 {
            pw.advance().unwrap();
        }
        assert_eq!(pw.q().to_dense(), DMatrix::from_row_slice(2, 2, &[16.0, 0.0, 0.0, 81.0]));
        assert_eq!(pw.p().to_dense(), DMatrix::from_row_slice(2, 2, &[8.0, 0.0, 0.0, 27.0]));
    }

    #[test]
    fn sparse_powers_densify_past_threshold() {
        let n = 8;
        let triplets: Vec<_> = (0..n).map(|i| (i, (i + 1) % n, 1.0)).chain((0..n).map(|i| (i, i, 0.5))).collect();
        let phi = BlockMatrix::sparse(CsrMatrix::from_triplets(n, n, &triplets).unwrap());
        let mut pw = MatrixPowers::new(phi.clone()).unwrap();
        let mut dense = phi.to_dense();
        let mut densified = false;
        for _ in 0..6 {
            pw.advance().unwrap();
            dense = &dense * phi.to_dense();
            assert!((pw.q().to_dense() - &dense).amax() < 1e-12);
            densified |= !pw.q().is_sparse();
        }
        assert!(densified);
    }

    #[test]
    fn overflow_is_reported_with_step() {
        let phi = BlockMatrix::from_row_slice(1, 1, &[1e200]);
        let mut pw = MatrixPowers::new(phi).unwrap();
        assert_eq!(pw.advance().unwrap_err(), LinalgError::NonFinitePower(2));
    }
}
