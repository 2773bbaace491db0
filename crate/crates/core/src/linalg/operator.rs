use std::fmt::Debug;
use std::ops::Range;

use nalgebra::DMatrix;

use super::expm::check_step;
use super::{exp_action, Block2, BlockMatrix, CsrMatrix, LinalgError};

/// A linear map that can be applied forwards and transposed.
///
/// Lazy sets hold linear maps through this trait, so a map can be an explicit
/// matrix or something only available through its action on vectors.
pub trait LinearOperator: Debug + Send + Sync {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>, LinalgError>;
    fn apply_transpose(&self, y: &[f64]) -> Result<Vec<f64>, LinalgError>;
}

impl LinearOperator for BlockMatrix {
    fn nrows(&self) -> usize {
        BlockMatrix::nrows(self)
    }
    fn ncols(&self) -> usize {
        BlockMatrix::ncols(self)
    }
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>, LinalgError> {
        Ok(self.matvec(x))
    }
    fn apply_transpose(&self, y: &[f64]) -> Result<Vec<f64>, LinalgError> {
        Ok(self.matvec_transpose(y))
    }
}

impl LinearOperator for Block2 {
    fn nrows(&self) -> usize {
        self.rows()
    }
    fn ncols(&self) -> usize {
        self.cols()
    }
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>, LinalgError> {
        Ok(Block2::apply(self, x)[..self.rows()].to_vec())
    }
    fn apply_transpose(&self, y: &[f64]) -> Result<Vec<f64>, LinalgError> {
        Ok(self.transpose_apply(y)[..self.cols()].to_vec())
    }
}

/// A dense matrix, typically a short row-block of a matrix power.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseOperator(pub DMatrix<f64>);

impl LinearOperator for DenseOperator {
    fn nrows(&self) -> usize {
        self.0.nrows()
    }
    fn ncols(&self) -> usize {
        self.0.ncols()
    }
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>, LinalgError> {
        Ok((0..self.0.nrows())
            .map(|i| self.0.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }
    fn apply_transpose(&self, y: &[f64]) -> Result<Vec<f64>, LinalgError> {
        Ok((0..self.0.ncols())
            .map(|j| self.0.column(j).iter().zip(y).map(|(a, b)| a * b).sum())
            .collect())
    }
}

/// Coordinate projection `x ↦ x[range]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    n: usize,
    range: Range<usize>,
}

impl Projection {
    pub fn new(n: usize, range: Range<usize>) -> Self {
        assert!(range.end <= n && range.start < range.end, "invalid projection range");
        Projection { n, range }
    }

    pub fn range(&self) -> Range<usize> {
        self.range.clone()
    }
}

impl LinearOperator for Projection {
    fn nrows(&self) -> usize {
        self.range.len()
    }
    fn ncols(&self) -> usize {
        self.n
    }
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>, LinalgError> {
        Ok(x[self.range.clone()].to_vec())
    }
    fn apply_transpose(&self, y: &[f64]) -> Result<Vec<f64>, LinalgError> {
        let mut out = vec![0.0; self.n];
        out[self.range.clone()].copy_from_slice(y);
        Ok(out)
    }
}

/// `x ↦ λx` on `ℝⁿ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scaling {
    pub n: usize,
    pub factor: f64,
}

impl LinearOperator for Scaling {
    fn nrows(&self) -> usize {
        self.n
    }
    fn ncols(&self) -> usize {
        self.n
    }
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>, LinalgError> {
        Ok(x.iter().map(|v| v * self.factor).collect())
    }
    fn apply_transpose(&self, y: &[f64]) -> Result<Vec<f64>, LinalgError> {
        self.apply(y)
    }
}

/// `e^{Aδ}` available only through its action on vectors.
#[derive(Clone, Debug)]
pub struct ExpOperator {
    generator: BlockMatrix,
    generator_t: BlockMatrix,
    delta: f64,
}

impl ExpOperator {
    pub fn new(a: &BlockMatrix, delta: f64) -> Result<Self, LinalgError> {
        check_step(delta)?;
        if !a.is_square() {
            return Err(LinalgError::NotSquare {
                rows: a.nrows(),
                cols: a.ncols(),
            });
        }
        if !a.is_finite() {
            return Err(LinalgError::NonFinite("exponential generator"));
        }
        Ok(ExpOperator {
            generator: a.clone(),
            generator_t: a.transpose(),
            delta,
        })
    }

    pub fn generator(&self) -> &BlockMatrix {
        &self.generator
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

impl LinearOperator for ExpOperator {
    fn nrows(&self) -> usize {
        self.generator.nrows()
    }
    fn ncols(&self) -> usize {
        self.generator.ncols()
    }
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>, LinalgError> {
        exp_action(&self.generator, x, self.delta)
    }
    fn apply_transpose(&self, y: &[f64]) -> Result<Vec<f64>, LinalgError> {
        exp_action(&self.generator_t, y, self.delta)
    }
}

/// `Φ₁(A, δ)` or `Φ₂(A, δ)` available through its action on vectors.
///
/// The action is read off the exponential of the augmented generator
/// `[[A, I], [0, 0]]` (order 1) or `[[A, I, 0], [0, 0, I], [0, 0, 0]]` (order 2)
/// applied to a vector supported on the last block.
#[derive(Clone, Debug)]
pub struct PhiOperator {
    n: usize,
    order: usize,
    augmented: BlockMatrix,
    augmented_t: BlockMatrix,
    delta: f64,
}

impl PhiOperator {
    pub fn new(a: &BlockMatrix, delta: f64, order: usize) -> Result<Self, LinalgError> {
        check_step(delta)?;
        assert!(order == 1 || order == 2, "only Φ₁ and Φ₂ are supported");
        if !a.is_square() {
            return Err(LinalgError::NotSquare {
                rows: a.nrows(),
                cols: a.ncols(),
            });
        }
        let n = a.nrows();
        let grid = order + 1;
        let ident = CsrMatrix::identity(n);
        let build = |m: &CsrMatrix| {
            let mut cells = vec![(0, 0, m)];
            for k in 0..order {
                cells.push((k, k + 1, &ident));
            }
            BlockMatrix::sparse(CsrMatrix::assemble_grid(grid, n, &cells))
        };
        let sparse = a.to_sparse();
        Ok(PhiOperator {
            n,
            order,
            augmented: build(&sparse),
            augmented_t: build(&sparse.transpose()),
            delta,
        })
    }

    fn act(&self, generator: &BlockMatrix, x: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if x.len() != self.n {
            return Err(LinalgError::DimensionMismatch {
                context: "Φ operator vector",
                expected: self.n,
                found: x.len(),
            });
        }
        let mut z = vec![0.0; self.n * (self.order + 1)];
        z[self.n * self.order..].copy_from_slice(x);
        let mut out = exp_action(generator, &z, self.delta)?;
        out.truncate(self.n);
        Ok(out)
    }
}

impl LinearOperator for PhiOperator {
    fn nrows(&self) -> usize {
        self.n
    }
    fn ncols(&self) -> usize {
        self.n
    }
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>, LinalgError> {
        self.act(&self.augmented, x)
    }
    fn apply_transpose(&self, y: &[f64]) -> Result<Vec<f64>, LinalgError> {
        self.act(&self.augmented_t, y)
    }
}
