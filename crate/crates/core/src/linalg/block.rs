use nalgebra::DMatrix;

use super::{block_count, block_range, CsrMatrix, LinalgError};

/// A block of at most 2×2 entries, stored row-major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Block2 {
    rows: usize,
    cols: usize,
    data: [f64; 4],
}

impl Block2 {
    pub fn new(rows: usize, cols: usize, data: [f64; 4]) -> Self {
        debug_assert!((1..=2).contains(&rows) && (1..=2).contains(&cols));
        Block2 { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Block2::new(rows, cols, [0.0; 4])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * 2 + j]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * 2 + j] = v;
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    /// Induced matrix norm: `p = 1`, `2` or `f64::INFINITY`.
    pub fn norm(&self, p: f64) -> f64 {
        let (r, c) = (self.rows, self.cols);
        if p == 1.0 {
            (0..c)
                .map(|j| (0..r).map(|i| self.get(i, j).abs()).sum::<f64>())
                .fold(0.0, f64::max)
        } else if p.is_infinite() {
            (0..r)
                .map(|i| (0..c).map(|j| self.get(i, j).abs()).sum::<f64>())
                .fold(0.0, f64::max)
        } else {
            // Largest singular value from the 2×2 Gram matrix.
            let mut g = [[0.0; 2]; 2];
            for a in 0..c {
                for b in 0..c {
                    g[a][b] = (0..r).map(|i| self.get(i, a) * self.get(i, b)).sum();
                }
            }
            let tr = g[0][0] + g[1][1];
            let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
            let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
            (tr / 2.0 + disc).max(0.0).sqrt()
        }
    }

    /// `selfᵀ · d` for `d` of length `rows`.
    #[inline]
    pub fn transpose_apply(&self, d: &[f64]) -> [f64; 2] {
        let mut out = [0.0; 2];
        for (j, o) in out.iter_mut().enumerate().take(self.cols) {
            *o = (0..self.rows).map(|i| self.get(i, j) * d[i]).sum();
        }
        out
    }

    #[inline]
    pub fn apply(&self, x: &[f64]) -> [f64; 2] {
        let mut out = [0.0; 2];
        for (i, o) in out.iter_mut().enumerate().take(self.rows) {
            *o = (0..self.cols).map(|j| self.get(i, j) * x[j]).sum();
        }
        out
    }
}

/// Backing storage of a [`BlockMatrix`].
#[derive(Clone, Debug, PartialEq)]
pub enum Storage {
    Dense(DMatrix<f64>),
    Sparse(CsrMatrix),
}

/// Matrix with an index of its nonzero 2×2 blocks per row-block.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockMatrix {
    storage: Storage,
    index: Vec<Vec<usize>>,
}

impl BlockMatrix {
    pub fn dense(m: DMatrix<f64>) -> Self {
        let index = dense_block_index(&m);
        BlockMatrix {
            storage: Storage::Dense(m),
            index,
        }
    }

    pub fn sparse(m: CsrMatrix) -> Self {
        let index = sparse_block_index(&m);
        BlockMatrix {
            storage: Storage::Sparse(m),
            index,
        }
    }

    pub fn from_row_slice(nrows: usize, ncols: usize, data: &[f64]) -> Self {
        BlockMatrix::dense(DMatrix::from_row_slice(nrows, ncols, data))
    }

    pub fn identity(n: usize) -> Self {
        BlockMatrix::dense(DMatrix::identity(n, n))
    }

    pub fn sparse_identity(n: usize) -> Self {
        BlockMatrix::sparse(CsrMatrix::identity(n))
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        BlockMatrix::dense(DMatrix::zeros(nrows, ncols))
    }

    pub fn storage(&self) -> &Storage {
        &self.storage
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.storage, Storage::Sparse(_))
    }

    pub fn nrows(&self) -> usize {
        match &self.storage {
            Storage::Dense(m) => m.nrows(),
            Storage::Sparse(m) => m.nrows(),
        }
    }

    pub fn ncols(&self) -> usize {
        match &self.storage {
            Storage::Dense(m) => m.ncols(),
            Storage::Sparse(m) => m.ncols(),
        }
    }

    pub fn is_square(&self) -> bool {
        self.nrows() == self.ncols()
    }

    pub fn row_block_count(&self) -> usize {
        block_count(self.nrows())
    }

    pub fn col_block_count(&self) -> usize {
        block_count(self.ncols())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match &self.storage {
            Storage::Dense(m) => m[(i, j)],
            Storage::Sparse(m) => m.get(i, j),
        }
    }

    /// The submatrix in row-block `i` and column-block `j`.
    pub fn block(&self, i: usize, j: usize) -> Block2 {
        let rows = block_range(i, self.nrows());
        let cols = block_range(j, self.ncols());
        let mut b = Block2::zeros(rows.len(), cols.len());
        match &self.storage {
            Storage::Dense(m) => {
                for (bi, r) in rows.clone().enumerate() {
                    for (bj, c) in cols.clone().enumerate() {
                        b.set(bi, bj, m[(r, c)]);
                    }
                }
            }
            Storage::Sparse(m) => {
                for (bi, r) in rows.clone().enumerate() {
                    let (cs, vs) = m.row(r);
                    let lo = cs.partition_point(|&c| c < cols.start);
                    for (&c, &v) in cs[lo..].iter().zip(&vs[lo..]) {
                        if c >= cols.end {
                            break;
                        }
                        b.set(bi, c - cols.start, v);
                    }
                }
            }
        }
        b
    }

    /// Column-blocks `j` for which block `(i, j)` has a nonzero entry.
    pub fn nonzero_blocks(&self, i: usize) -> &[usize] {
        &self.index[i]
    }

    /// Fraction of blocks with at least one nonzero entry.
    pub fn block_density(&self) -> f64 {
        let total = self.row_block_count() * self.col_block_count();
        if total == 0 {
            return 0.0;
        }
        self.index.iter().map(Vec::len).sum::<usize>() as f64 / total as f64
    }

    /// The rows of row-block `i` as a dense `rows × ncols` matrix.
    pub fn row_block(&self, i: usize) -> DMatrix<f64> {
        let rows = block_range(i, self.nrows());
        match &self.storage {
            Storage::Dense(m) => m.rows(rows.start, rows.len()).into_owned(),
            Storage::Sparse(m) => {
                let mut out = DMatrix::zeros(rows.len(), self.ncols());
                for (bi, r) in rows.enumerate() {
                    let (cs, vs) = m.row(r);
                    for (&c, &v) in cs.iter().zip(vs) {
                        out[(bi, c)] = v;
                    }
                }
                out
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match &self.storage {
            Storage::Dense(m) => m.clone(),
            Storage::Sparse(m) => m.to_dense(),
        }
    }

    pub fn into_dense(self) -> BlockMatrix {
        match self.storage {
            Storage::Dense(_) => self,
            Storage::Sparse(m) => BlockMatrix::dense(m.to_dense()),
        }
    }

    pub fn to_sparse(&self) -> CsrMatrix {
        match &self.storage {
            Storage::Dense(m) => CsrMatrix::from_dense(m),
            Storage::Sparse(m) => m.clone(),
        }
    }

    pub fn transpose(&self) -> BlockMatrix {
        match &self.storage {
            Storage::Dense(m) => BlockMatrix::dense(m.transpose()),
            Storage::Sparse(m) => BlockMatrix::sparse(m.transpose()),
        }
    }

    /// Entrywise absolute value.
    pub fn abs(&self) -> BlockMatrix {
        match &self.storage {
            Storage::Dense(m) => BlockMatrix::dense(m.abs()),
            Storage::Sparse(m) => BlockMatrix::sparse(m.map_values(f64::abs)),
        }
    }

    pub fn scale(&self, s: f64) -> BlockMatrix {
        match &self.storage {
            Storage::Dense(m) => BlockMatrix::dense(m * s),
            Storage::Sparse(m) => BlockMatrix::sparse(m.map_values(|v| v * s)),
        }
    }

    pub fn is_finite(&self) -> bool {
        match &self.storage {
            Storage::Dense(m) => m.iter().all(|v| v.is_finite()),
            Storage::Sparse(m) => m.is_finite(),
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        match &self.storage {
            Storage::Dense(m) => {
                let mut out = vec![0.0; m.nrows()];
                for (j, &xj) in x.iter().enumerate() {
                    if xj == 0.0 {
                        continue;
                    }
                    for (o, &a) in out.iter_mut().zip(m.column(j).iter()) {
                        *o += a * xj;
                    }
                }
                out
            }
            Storage::Sparse(m) => m.matvec(x),
        }
    }

    pub fn matvec_transpose(&self, y: &[f64]) -> Vec<f64> {
        match &self.storage {
            Storage::Dense(m) => (0..m.ncols())
                .map(|j| m.column(j).iter().zip(y).map(|(a, b)| a * b).sum())
                .collect(),
            Storage::Sparse(m) => m.matvec_transpose(y),
        }
    }

    /// Matrix product. Sparse times sparse stays sparse; any dense operand
    /// gives a dense result.
    pub fn matmul(&self, other: &BlockMatrix) -> Result<BlockMatrix, LinalgError> {
        if self.ncols() != other.nrows() {
            return Err(LinalgError::DimensionMismatch {
                context: "matrix product",
                expected: self.ncols(),
                found: other.nrows(),
            });
        }
        Ok(match (&self.storage, &other.storage) {
            (Storage::Sparse(a), Storage::Sparse(b)) => BlockMatrix::sparse(a.matmul(b)?),
            (Storage::Dense(a), Storage::Dense(b)) => BlockMatrix::dense(a * b),
            (Storage::Sparse(a), Storage::Dense(b)) => {
                let mut out = DMatrix::zeros(a.nrows(), b.ncols());
                for (i, k, v) in a.iter() {
                    for j in 0..b.ncols() {
                        out[(i, j)] += v * b[(k, j)];
                    }
                }
                BlockMatrix::dense(out)
            }
            (Storage::Dense(a), Storage::Sparse(b)) => {
                let mut out = DMatrix::zeros(a.nrows(), b.ncols());
                for (k, j, v) in b.iter() {
                    for i in 0..a.nrows() {
                        out[(i, j)] += a[(i, k)] * v;
                    }
                }
                BlockMatrix::dense(out)
            }
        })
    }

    /// Induced matrix norm for `p ∈ {1, 2, ∞}`.
    pub fn norm(&self, p: f64) -> f64 {
        if p == 1.0 {
            let mut cols = vec![0.0; self.ncols()];
            self.for_each_nonzero(|_, j, v| cols[j] += v.abs());
            cols.into_iter().fold(0.0, f64::max)
        } else if p.is_infinite() {
            let mut rows = vec![0.0; self.nrows()];
            self.for_each_nonzero(|i, _, v| rows[i] += v.abs());
            rows.into_iter().fold(0.0, f64::max)
        } else {
            let d = self.to_dense();
            if d.is_empty() {
                return 0.0;
            }
            d.singular_values().max()
        }
    }

    fn for_each_nonzero(&self, mut f: impl FnMut(usize, usize, f64)) {
        match &self.storage {
            Storage::Dense(m) => {
                for j in 0..m.ncols() {
                    for i in 0..m.nrows() {
                        f(i, j, m[(i, j)]);
                    }
                }
            }
            Storage::Sparse(m) => m.iter().for_each(|(i, j, v)| f(i, j, v)),
        }
    }
}

fn dense_block_index(m: &DMatrix<f64>) -> Vec<Vec<usize>> {
    let (nr, nc) = (m.nrows(), m.ncols());
    (0..block_count(nr))
        .map(|i| {
            let rows = block_range(i, nr);
            (0..block_count(nc))
                .filter(|&j| {
                    let cols = block_range(j, nc);
                    rows.clone()
                        .any(|r| cols.clone().any(|c| m[(r, c)] != 0.0))
                })
                .collect()
        })
        .collect()
}

fn sparse_block_index(m: &CsrMatrix) -> Vec<Vec<usize>> {
    let nr = m.nrows();
    (0..block_count(nr))
        .map(|i| {
            let mut cols: Vec<usize> = block_range(i, nr)
                .flat_map(|r| m.row(r).0.iter().map(|&c| c / 2))
                .collect();
            cols.sort_unstable();
            cols.dedup();
            cols
        })
        .collect()
}
