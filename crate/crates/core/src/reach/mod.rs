//! Decomposed reach-tube computation.
//!
//! The non-recursive form `X(k) = Φᵏ X(0) ⊕ W(k)` is evaluated blockwise:
//!
//! ```text
//! X̂ᵢ(k) = approx( ⊕ⱼ Φᵏᵢⱼ X̂ⱼ(0) ⊕ Ŵᵢ(k) )
//! Ŵᵢ(k) = approx( Ŵᵢ(k−1) ⊕ [row-block i of Φ^{k−1}] V )       constant V
//! Ŵᵢ(k) = approx( ⊕ⱼ Φᵢⱼ Ŵⱼ(k−1) ⊕ V̂ᵢ(k−1) )                   varying V
//! ```
//!
//! Step `k` never reads the collapsed sets of step `k−1`, so overapproximation
//! error does not compound through the state sets. Only the tracked blocks are
//! computed, except that the varying-input recurrence needs every block of Ŵ.

mod property;

pub use property::{
    check_property, Atom, CheckOptions, Comparison, Formula, SafetyProperty, Verdict,
};

use std::sync::Arc;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::approx::{
    decompose, decompose_lazy, overapproximate, ApproxError, ApproxScheme, BlockStructure,
};
use crate::discretize::{DiscreteSystem, DiscretizeError, Model, StepInputs, Transition};
use crate::linalg::{
    block_count, block_range, Block2, BlockMatrix, DenseOperator, LinalgError, LinearOperator,
    MatrixPowers,
};
use crate::par;
use crate::sets::{LazySet, SetError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReachError {
    #[error("invalid reach options: {0}")]
    InvalidOptions(String),
    #[error("block {block} out of range; the system has {count} blocks")]
    BlockOutOfRange { block: usize, count: usize },
    #[error("output map touches untracked blocks {0:?}")]
    UntrackedBlocks(Vec<usize>),
    #[error("invalid property: {0}")]
    Property(String),
    #[error(transparent)]
    Approx(#[from] ApproxError),
    #[error(transparent)]
    Set(#[from] SetError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Discretize(#[from] DiscretizeError),
}

impl ReachError {
    pub fn kind(&self) -> &'static str {
        match self {
            ReachError::InvalidOptions(_) => "options",
            ReachError::BlockOutOfRange { .. } => "block_range",
            ReachError::UntrackedBlocks(_) => "untracked_blocks",
            ReachError::Property(_) => "property",
            ReachError::Approx(e) => e.kind(),
            ReachError::Set(e) => e.kind(),
            ReachError::Linalg(e) => e.kind(),
            ReachError::Discretize(e) => e.kind(),
        }
    }
}

/// How block sets are collapsed after each set operation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BlockApprox {
    /// Overapproximate with the given scheme.
    Scheme(ApproxScheme),
    /// Keep exact projections and lazy sums. Support evaluation cost grows
    /// with `k`; meant for small instances and error analysis.
    Lazy,
}

impl Default for BlockApprox {
    fn default() -> Self {
        BlockApprox::Scheme(ApproxScheme::BoxDirections)
    }
}

impl BlockApprox {
    fn apply(&self, set: Arc<LazySet>) -> Result<Arc<LazySet>, ApproxError> {
        match self {
            BlockApprox::Scheme(s) => overapproximate(&set, *s),
            BlockApprox::Lazy => Ok(set),
        }
    }

    /// Cartesian decomposition of `set` with this collapse rule.
    pub fn decompose(
        &self,
        set: &Arc<LazySet>,
        bs: &BlockStructure,
    ) -> Result<Vec<Arc<LazySet>>, ApproxError> {
        match self {
            BlockApprox::Scheme(s) => decompose(set, bs, *s),
            BlockApprox::Lazy => decompose_lazy(set, bs),
        }
    }
}

/// How rows of `Φᵏ` are produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum PowerStrategy {
    /// Full powers for explicit `Φ` when many blocks are tracked, row-blocks
    /// otherwise.
    #[default]
    Auto,
    /// Maintain `Φ^{k−1}` and `Φᵏ` as full matrices.
    FullPowers,
    /// Propagate only the tracked row-blocks, `rᵀ ← rᵀΦ`, which also works
    /// when `Φ` is only available through its action.
    RowBlocks,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReachOptions {
    /// Number of tube entries `N` (entries `0..N`).
    pub steps: usize,
    pub approx: BlockApprox,
    /// Blocks to compute; `None` tracks all blocks.
    pub blocks: Option<Vec<usize>>,
    pub strategy: PowerStrategy,
    /// Keep the accumulated input sets `Ŵᵢ(k)` in the tube.
    pub record_inputs: bool,
}

impl ReachOptions {
    pub fn new(steps: usize) -> Self {
        ReachOptions {
            steps,
            approx: BlockApprox::default(),
            blocks: None,
            strategy: PowerStrategy::Auto,
            record_inputs: false,
        }
    }

    pub fn with_scheme(mut self, scheme: ApproxScheme) -> Self {
        self.approx = BlockApprox::Scheme(scheme);
        self
    }

    pub fn lazy(mut self) -> Self {
        self.approx = BlockApprox::Lazy;
        self
    }

    pub fn with_blocks(mut self, blocks: Vec<usize>) -> Self {
        self.blocks = Some(blocks);
        self
    }

    pub fn with_strategy(mut self, strategy: PowerStrategy) -> Self {
        self.strategy = strategy;
        self
    }
}

/// Sequence of 2D (or 1D) block sets, one row per time step.
#[derive(Clone, Debug)]
pub struct ReachTube {
    pub delta: f64,
    pub model: Model,
    pub blocks: BlockStructure,
    /// Block indices in the order of each row of `sets`.
    pub tracked: Vec<usize>,
    /// `sets[k][t]` is `X̂_{tracked[t]}(k)`.
    pub sets: Vec<Vec<Arc<LazySet>>>,
    /// `inputs[k][t]` is `Ŵ_{tracked[t]}(k)` when recorded.
    pub inputs: Option<Vec<Vec<Arc<LazySet>>>>,
}

impl ReachTube {
    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    /// Position of `block` in [`ReachTube::tracked`].
    pub fn slot(&self, block: usize) -> Option<usize> {
        self.tracked.iter().position(|&b| b == block)
    }

    pub fn block_set(&self, k: usize, block: usize) -> Option<&Arc<LazySet>> {
        self.slot(block).map(|t| &self.sets[k][t])
    }

    /// Time covered by entry `k`: `[kδ, (k+1)δ]` in dense time, `kδ` otherwise.
    pub fn time_interval(&self, k: usize) -> (f64, f64) {
        let t = k as f64 * self.delta;
        match self.model {
            Model::Dense => (t, t + self.delta),
            Model::Discrete => (t, t),
        }
    }

    /// `ρ(ℓ, X̂₁(k) × ⋯ × X̂_b(k))`; components of `ℓ` on untracked blocks must
    /// be zero.
    pub fn support(&self, k: usize, dir: &[f64]) -> Result<f64, ReachError> {
        if dir.len() != self.blocks.dim() {
            return Err(SetError::DimensionMismatch {
                node: "ReachTube",
                expected: self.blocks.dim(),
                found: dir.len(),
            }
            .into());
        }
        let mut total = 0.0;
        for i in 0..self.blocks.count() {
            let d = &dir[self.blocks.range(i)];
            if d.iter().all(|x| *x == 0.0) {
                continue;
            }
            let set = self
                .block_set(k, i)
                .ok_or_else(|| ReachError::UntrackedBlocks(vec![i]))?;
            total += set.support_function(d)?;
        }
        Ok(total)
    }

    /// Step `k` as one lazy Cartesian product; requires all blocks tracked.
    pub fn full_set(&self, k: usize) -> Result<Arc<LazySet>, ReachError> {
        let missing: Vec<usize> = (0..self.blocks.count()).filter(|i| self.slot(*i).is_none()).collect();
        if !missing.is_empty() {
            return Err(ReachError::UntrackedBlocks(missing));
        }
        let parts = (0..self.blocks.count())
            .map(|i| self.block_set(k, i).unwrap().clone())
            .collect();
        Ok(LazySet::cartesian_product(parts)?)
    }
}

/// Row-block `i` of a matrix power together with its nonzero column-blocks.
#[derive(Clone, Debug)]
pub struct RowBlock {
    pub rows: DMatrix<f64>,
    pub nonzero: Vec<usize>,
}

impl RowBlock {
    pub fn from_rows(rows: DMatrix<f64>) -> Self {
        let n = rows.ncols();
        let nonzero = (0..block_count(n))
            .filter(|&j| {
                block_range(j, n).any(|c| rows.column(c).iter().any(|v| *v != 0.0))
            })
            .collect();
        RowBlock { rows, nonzero }
    }

    pub fn of(m: &BlockMatrix, i: usize) -> Self {
        RowBlock {
            rows: m.row_block(i),
            nonzero: m.nonzero_blocks(i).to_vec(),
        }
    }

    /// The 2×2 (or smaller) block in column-block `j`.
    pub fn block(&self, j: usize) -> Block2 {
        let cols = block_range(j, self.rows.ncols());
        let mut data = [0.0; 4];
        for r in 0..self.rows.nrows() {
            for (c, col) in cols.clone().enumerate() {
                data[2 * r + c] = self.rows[(r, col)];
            }
        }
        Block2::new(self.rows.nrows(), cols.len(), data)
    }
}

/// Source of `P = Φ^{k−1}` and `Q = Φᵏ` restricted to tracked row-blocks.
enum PowerSource {
    Full(MatrixPowers),
    Rows {
        op: Arc<dyn LinearOperator>,
        tracked: Vec<usize>,
        p: Vec<DMatrix<f64>>,
        q: Vec<DMatrix<f64>>,
        k: usize,
    },
}

impl PowerSource {
    fn new(
        phi: &Transition,
        bs: &BlockStructure,
        tracked: &[usize],
        strategy: PowerStrategy,
    ) -> Result<Self, ReachError> {
        let full = match (strategy, phi.explicit()) {
            (PowerStrategy::FullPowers, _) => true,
            (PowerStrategy::RowBlocks, _) => false,
            (PowerStrategy::Auto, Some(m)) => m.is_sparse() || 2 * tracked.len() > bs.count(),
            (PowerStrategy::Auto, None) => false,
        };
        if full {
            let m = match phi {
                Transition::Explicit(m) => m.as_ref().clone(),
                Transition::Lazy(_) => phi.materialize()?,
            };
            return Ok(PowerSource::Full(MatrixPowers::new(m)?));
        }
        let op = phi.operator();
        let n = bs.dim();
        let p: Vec<DMatrix<f64>> = tracked
            .iter()
            .map(|&i| {
                let r = bs.range(i);
                let mut m = DMatrix::zeros(r.len(), n);
                for (a, c) in r.enumerate() {
                    m[(a, c)] = 1.0;
                }
                m
            })
            .collect();
        let q = propagate_rows(op.as_ref(), &p, 1)?;
        Ok(PowerSource::Rows {
            op,
            tracked: tracked.to_vec(),
            p,
            q,
            k: 1,
        })
    }

    fn rows(&self, t: usize, i: usize) -> (RowBlock, RowBlock) {
        match self {
            PowerSource::Full(pw) => (RowBlock::of(pw.p(), i), RowBlock::of(pw.q(), i)),
            PowerSource::Rows { p, q, tracked, .. } => {
                debug_assert_eq!(tracked[t], i);
                (RowBlock::from_rows(p[t].clone()), RowBlock::from_rows(q[t].clone()))
            }
        }
    }

    fn advance(&mut self) -> Result<(), ReachError> {
        match self {
            PowerSource::Full(pw) => pw.advance()?,
            PowerSource::Rows { op, p, q, k, .. } => {
                let next = propagate_rows(op.as_ref(), q, *k + 1)?;
                *p = std::mem::replace(q, next);
                *k += 1;
            }
        }
        Ok(())
    }
}

/// `R ↦ RΦ` for each row-block, computed as `Φᵀ rᵀ` row by row.
fn propagate_rows(
    op: &dyn LinearOperator,
    rows: &[DMatrix<f64>],
    power: usize,
) -> Result<Vec<DMatrix<f64>>, ReachError> {
    let out = par::try_map_slice(rows, |m| {
        let mut next = DMatrix::zeros(m.nrows(), m.ncols());
        for r in 0..m.nrows() {
            let row: Vec<f64> = m.row(r).iter().copied().collect();
            let moved = op.apply_transpose(&row)?;
            if moved.iter().any(|v| !v.is_finite()) {
                return Err(LinalgError::NonFinitePower(power));
            }
            for (c, v) in moved.into_iter().enumerate() {
                next[(r, c)] = v;
            }
        }
        Ok(next)
    })?;
    Ok(out)
}

fn resolve_tracked(bs: &BlockStructure, blocks: &Option<Vec<usize>>) -> Result<Vec<usize>, ReachError> {
    let tracked = match blocks {
        None => (0..bs.count()).collect(),
        Some(b) => {
            if b.is_empty() {
                return Err(ReachError::InvalidOptions("no blocks to track".into()));
            }
            let mut b = b.clone();
            b.sort_unstable();
            b.dedup();
            b
        }
    };
    if let Some(&bad) = tracked.iter().find(|&&i| i >= bs.count()) {
        return Err(ReachError::BlockOutOfRange {
            block: bad,
            count: bs.count(),
        });
    }
    Ok(tracked)
}

/// Line 15 of the loop: `approx(⊕ⱼ Qᵢⱼ X̂ⱼ(0) ⊕ Ŵᵢ)`, visiting only nonzero
/// blocks of the row-block `q`.
pub fn assemble_block(
    q: &RowBlock,
    x0_hat: &[Arc<LazySet>],
    w: &Arc<LazySet>,
    approx: BlockApprox,
) -> Result<Arc<LazySet>, ReachError> {
    let mut terms: Vec<Arc<LazySet>> = Vec::with_capacity(q.nonzero.len() + 1);
    for &j in &q.nonzero {
        terms.push(LazySet::linear_map(Arc::new(q.block(j)), x0_hat[j].clone())?);
    }
    terms.push(w.clone());
    let sum = LazySet::minkowski_sum_array(terms)?;
    Ok(approx.apply(sum)?)
}

/// Runs the constant-input or varying-input recurrence depending on the
/// inputs of `sys`.
pub fn reach(sys: &DiscreteSystem, opts: &ReachOptions) -> Result<ReachTube, ReachError> {
    if sys.inputs.is_constant() {
        reach_decomposed(sys, opts)
    } else {
        reach_decomposed_varying(sys, opts)
    }
}

fn check_steps(opts: &ReachOptions) -> Result<(), ReachError> {
    if opts.steps == 0 {
        return Err(ReachError::InvalidOptions("at least one step is required".into()));
    }
    Ok(())
}

/// Constant-input recurrence: `Ŵᵢ` accumulates row-blocks of successive
/// powers applied to the full-dimensional `V`.
pub fn reach_decomposed(sys: &DiscreteSystem, opts: &ReachOptions) -> Result<ReachTube, ReachError> {
    check_steps(opts)?;
    let StepInputs::Constant(v) = &sys.inputs else {
        return Err(ReachError::InvalidOptions(
            "constant-input recurrence called with an input sequence".into(),
        ));
    };
    let n = sys.dim();
    let bs = BlockStructure::new(n);
    let tracked = resolve_tracked(&bs, &opts.blocks)?;
    let x0_hat = opts.approx.decompose(&sys.x_init, &bs)?;

    let mut sets = Vec::with_capacity(opts.steps);
    sets.push(tracked.iter().map(|&i| x0_hat[i].clone()).collect::<Vec<_>>());
    let mut w: Vec<Arc<LazySet>> = tracked.iter().map(|&i| LazySet::zero(bs.block_dim(i))).collect();
    // Lazy mode keeps the summands so the sum stays flat.
    let mut w_terms: Vec<Vec<Arc<LazySet>>> = vec![Vec::new(); tracked.len()];
    let mut recorded = opts.record_inputs.then(|| vec![w.clone()]);

    if opts.steps > 1 {
        let mut powers = PowerSource::new(&sys.phi, &bs, &tracked, opts.strategy)?;
        for k in 1..opts.steps {
            let results = par::try_map_range(tracked.len(), |t| -> Result<_, ReachError> {
                let i = tracked[t];
                let (p, q) = powers.rows(t, i);
                let pv = LazySet::linear_map(Arc::new(DenseOperator(p.rows)), v.clone())?;
                let (w_new, term) = match opts.approx {
                    BlockApprox::Scheme(s) => {
                        let sum = LazySet::minkowski_sum(w[t].clone(), pv)?;
                        (overapproximate(&sum, s)?, None)
                    }
                    BlockApprox::Lazy => {
                        let mut parts = w_terms[t].clone();
                        parts.push(pv.clone());
                        (LazySet::minkowski_sum_array(parts)?, Some(pv))
                    }
                };
                let x = assemble_block(&q, &x0_hat, &w_new, opts.approx)?;
                Ok((w_new, term, x))
            })?;
            let mut row = Vec::with_capacity(tracked.len());
            for (t, (w_new, term, x)) in results.into_iter().enumerate() {
                w[t] = w_new;
                if let Some(term) = term {
                    w_terms[t].push(term);
                }
                row.push(x);
            }
            sets.push(row);
            if let Some(r) = recorded.as_mut() {
                r.push(w.clone());
            }
            if k + 1 < opts.steps {
                powers.advance()?;
            }
        }
    }
    Ok(ReachTube {
        delta: sys.delta,
        model: sys.model,
        blocks: bs,
        tracked,
        sets,
        inputs: recorded,
    })
}

/// Varying-input recurrence. Every block of `Ŵ` is maintained because the
/// update couples blocks through `Φ`; `Φ` is materialised if it is implicit.
pub fn reach_decomposed_varying(
    sys: &DiscreteSystem,
    opts: &ReachOptions,
) -> Result<ReachTube, ReachError> {
    check_steps(opts)?;
    sys.check_horizon(opts.steps)?;
    let BlockApprox::Scheme(scheme) = opts.approx else {
        return Err(ReachError::InvalidOptions(
            "the varying-input recurrence needs an approximation scheme".into(),
        ));
    };
    let n = sys.dim();
    let bs = BlockStructure::new(n);
    let tracked = resolve_tracked(&bs, &opts.blocks)?;
    let phi = match &sys.phi {
        Transition::Explicit(m) => m.clone(),
        Transition::Lazy(_) => Arc::new(sys.phi.materialize()?),
    };
    let x0_hat = decompose(&sys.x_init, &bs, scheme)?;

    let mut sets = Vec::with_capacity(opts.steps);
    sets.push(tracked.iter().map(|&i| x0_hat[i].clone()).collect::<Vec<_>>());
    let mut w: Vec<Arc<LazySet>> = (0..bs.count()).map(|i| LazySet::zero(bs.block_dim(i))).collect();
    let mut recorded = opts
        .record_inputs
        .then(|| vec![tracked.iter().map(|&i| w[i].clone()).collect::<Vec<_>>()]);

    if opts.steps > 1 {
        let transition = Transition::Explicit(phi.clone());
        let mut powers = PowerSource::new(&transition, &bs, &tracked, opts.strategy)?;
        for k in 1..opts.steps {
            let v_hat = decompose(sys.inputs.at(k - 1), &bs, scheme)?;
            w = varying_input_step(&phi, &w, &v_hat, scheme)?;
            let row = par::try_map_range(tracked.len(), |t| -> Result<_, ReachError> {
                let i = tracked[t];
                let (_, q) = powers.rows(t, i);
                assemble_block(&q, &x0_hat, &w[i], opts.approx)
            })?;
            sets.push(row);
            if let Some(r) = recorded.as_mut() {
                r.push(tracked.iter().map(|&i| w[i].clone()).collect());
            }
            if k + 1 < opts.steps {
                powers.advance()?;
            }
        }
    }
    Ok(ReachTube {
        delta: sys.delta,
        model: sys.model,
        blocks: bs,
        tracked,
        sets,
        inputs: recorded,
    })
}

/// One step of `Ŵᵢ ← approx(⊕ⱼ Φᵢⱼ Ŵⱼ ⊕ V̂ᵢ)` over all blocks.
pub(crate) fn varying_input_step(
    phi: &BlockMatrix,
    w: &[Arc<LazySet>],
    v_hat: &[Arc<LazySet>],
    scheme: ApproxScheme,
) -> Result<Vec<Arc<LazySet>>, ReachError> {
    par::try_map_range(w.len(), |i| -> Result<_, ReachError> {
        let mut terms: Vec<Arc<LazySet>> = Vec::new();
        for &j in phi.nonzero_blocks(i) {
            terms.push(LazySet::linear_map(Arc::new(phi.block(i, j)), w[j].clone())?);
        }
        terms.push(v_hat[i].clone());
        Ok(overapproximate(LazySet::minkowski_sum_array(terms)?.as_ref(), scheme)?)
    })
}

/// Image of each tube entry under an output map `M` (one or two rows),
/// collapsed by `approx`. A map that is exactly the projection onto a tracked
/// block returns the stored sets.
pub fn project_output(
    tube: &ReachTube,
    m: &DMatrix<f64>,
    approx: BlockApprox,
) -> Result<Vec<Arc<LazySet>>, ReachError> {
    let n = tube.blocks.dim();
    if m.ncols() != n || m.nrows() == 0 || m.nrows() > 2 {
        return Err(ReachError::InvalidOptions(format!(
            "output map must be 1×{n} or 2×{n}, got {}×{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let used: Vec<usize> = (0..tube.blocks.count())
        .filter(|&i| tube.blocks.range(i).any(|c| m.column(c).iter().any(|v| *v != 0.0)))
        .collect();
    let missing: Vec<usize> = used.iter().copied().filter(|&i| tube.slot(i).is_none()).collect();
    if !missing.is_empty() {
        return Err(ReachError::UntrackedBlocks(missing));
    }
    if used.len() == 1 {
        let i = used[0];
        let r = tube.blocks.range(i);
        let is_projection = m.nrows() == r.len()
            && (0..m.nrows()).all(|a| (0..n).all(|c| m[(a, c)] == if c == r.start + a { 1.0 } else { 0.0 }));
        if is_projection {
            let t = tube.slot(i).unwrap();
            return Ok(tube.sets.iter().map(|row| row[t].clone()).collect());
        }
    }
    let used = if used.is_empty() { vec![tube.tracked[0]] } else { used };
    let cols: Vec<usize> = used.iter().flat_map(|&i| tube.blocks.range(i)).collect();
    let mut restricted = DMatrix::zeros(m.nrows(), cols.len());
    for (a, &c) in cols.iter().enumerate() {
        restricted.set_column(a, &m.column(c));
    }
    let op: Arc<dyn LinearOperator> = Arc::new(DenseOperator(restricted));
    par::try_map_slice(&tube.sets, |row| -> Result<_, ReachError> {
        let parts = used.iter().map(|&i| row[tube.slot(i).unwrap()].clone()).collect();
        let product = LazySet::cartesian_product(parts)?;
        let image = LazySet::linear_map(op.clone(), product)?;
        Ok(approx.apply(image)?)
    })
}
