use std::sync::Arc;

use crate::approx::{ApproxScheme, BlockStructure};
use crate::discretize::{DiscreteSystem, StepInputs};
use crate::linalg::BlockMatrix;
use crate::reach::BlockApprox;
use crate::sets::{LazySet, Norm};

use super::OracleError;

/// Block norms of one column-block of `Φ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ColumnBlockNorms {
    /// Row-block with the largest norm.
    pub largest: usize,
    pub largest_norm: f64,
    /// Largest norm among the other row-blocks, zero if there are none.
    pub alpha: f64,
}

/// For each column-block `j`, the block `Φ_qj` of largest `p`-norm and the
/// second largest norm `αⱼ` of the column.
pub fn column_block_alphas(phi: &BlockMatrix, norm: Norm) -> Vec<ColumnBlockNorms> {
    let p = norm.p();
    let mut cols = vec![
        ColumnBlockNorms {
            largest: 0,
            largest_norm: 0.0,
            alpha: 0.0,
        };
        phi.col_block_count()
    ];
    for i in 0..phi.row_block_count() {
        for &j in phi.nonzero_blocks(i) {
            let v = phi.block(i, j).norm(p);
            let c = &mut cols[j];
            if v > c.largest_norm {
                c.alpha = c.largest_norm;
                c.largest_norm = v;
                c.largest = i;
            } else {
                c.alpha = c.alpha.max(v);
            }
        }
    }
    cols
}

const DIAMETER_ANGLES: usize = 720;

/// Smallest `Δ` with `ρ(d) + ρ(−d) ≤ ‖d‖_q Δ` for all `d`, where `q` is the
/// dual exponent of `norm`. Exact for the 1- and ∞-norms; for the 2-norm an
/// upper bound from sampled widths.
pub fn block_diameter(set: &LazySet, norm: Norm) -> Result<f64, OracleError> {
    let n = set.dim();
    let width = |d: &[f64]| -> Result<f64, OracleError> {
        let (a, b) = set.support_pair(d)?;
        Ok((a + b).max(0.0))
    };
    let max_width = |dirs: &mut dyn Iterator<Item = Vec<f64>>| -> Result<f64, OracleError> {
        let mut best = 0.0f64;
        for d in dirs {
            best = best.max(width(&d)?);
        }
        Ok(best)
    };
    if n == 1 {
        return width(&[1.0]);
    }
    match norm {
        Norm::Inf => max_width(&mut (0..n).map(|i| {
            let mut d = vec![0.0; n];
            d[i] = 1.0;
            d
        })),
        Norm::One => {
            if n > 20 {
                return Err(OracleError::InvalidArgument(format!(
                    "1-norm diameter needs 2^{n} directions"
                )));
            }
            // ±d give the same width, so fix the sign of the first entry
            max_width(&mut (0..1usize << (n - 1)).map(|mask| {
                (0..n).map(|i| if i > 0 && mask >> (i - 1) & 1 == 1 { -1.0 } else { 1.0 }).collect()
            }))
        }
        Norm::Two => {
            if n != 2 {
                return Err(OracleError::InvalidArgument(format!(
                    "2-norm diameter is only available for blocks of dimension ≤ 2, got {n}"
                )));
            }
            // widths are symmetric, so half a turn suffices
            let h = std::f64::consts::PI / DIAMETER_ANGLES as f64;
            let best = max_width(&mut (0..DIAMETER_ANGLES).map(|k| {
                let t = h * k as f64;
                vec![t.cos(), t.sin()]
            }))?;
            Ok(best / (h / 2.0).cos())
        }
    }
}

/// `(b−1) Σⱼ αⱼ Δⱼ + ‖Φ‖ ε_x`: bound on the Hausdorff distance between `ΦX`
/// and the decomposed image of the decomposed set `X̂₁ × ⋯ × X̂_b`, where
/// `ε_x ≥ d_H(X, X̂)`.
pub fn decomposed_map_error_bound(
    phi: &BlockMatrix,
    blocks: &[Arc<LazySet>],
    eps_x: f64,
    norm: Norm,
) -> Result<f64, OracleError> {
    if blocks.len() != phi.col_block_count() {
        return Err(OracleError::InvalidArgument(format!(
            "{} block sets for {} column-blocks",
            blocks.len(),
            phi.col_block_count()
        )));
    }
    if !(eps_x >= 0.0 && eps_x.is_finite()) {
        return Err(OracleError::InvalidArgument(format!("ε_x = {eps_x}")));
    }
    let b = phi.row_block_count();
    let mut sum = 0.0;
    for (c, set) in column_block_alphas(phi, norm).iter().zip(blocks) {
        if c.alpha > 0.0 {
            sum += c.alpha * block_diameter(set, norm)?;
        }
    }
    Ok(b.saturating_sub(1) as f64 * sum + phi.norm(norm.p()) * eps_x)
}

/// Upper bound on `d_H(X, X̂)` where `X̂` is the block decomposition of `X`
/// under `approx`.
///
/// Zero when `X` is already a product over the blocks that the collapse
/// preserves; otherwise the norm of the interval-hull widths, plus the
/// per-block tolerance for ε-close polygons.
pub fn decomposition_error_upper(
    set: &Arc<LazySet>,
    blocks: &BlockStructure,
    approx: BlockApprox,
    norm: Norm,
) -> Result<f64, OracleError> {
    let exact = match approx {
        BlockApprox::Lazy => is_decomposed(set, 0, blocks),
        BlockApprox::Scheme(ApproxScheme::BoxDirections) => is_box_product(set, 0, blocks),
        BlockApprox::Scheme(ApproxScheme::EpsilonClose(_)) => is_decomposed(set, 0, blocks),
    };
    let mut err = if exact {
        0.0
    } else {
        let ih = set.interval_hull()?;
        let widths: Vec<f64> = ih.radius().iter().map(|r| 2.0 * r).collect();
        norm.of(&widths)
    };
    if let BlockApprox::Scheme(ApproxScheme::EpsilonClose(eps)) = approx {
        if !is_box_product(set, 0, blocks) {
            // each block is within eps in the 2-norm
            let per_block = match norm {
                Norm::One => std::f64::consts::SQRT_2 * eps,
                Norm::Two | Norm::Inf => eps,
            };
            let b = blocks.count() as f64;
            err += match norm {
                Norm::One => b * per_block,
                Norm::Two => b.sqrt() * per_block,
                Norm::Inf => per_block,
            };
        }
    }
    Ok(err)
}

/// Whether `set`, placed at coordinate `offset`, equals the product of its
/// block projections.
fn is_decomposed(set: &LazySet, offset: usize, blocks: &BlockStructure) -> bool {
    match set {
        LazySet::Hyperrectangle(_) | LazySet::Singleton(_) => true,
        LazySet::CartesianProduct(c) => {
            let mut off = offset;
            c.parts().iter().all(|p| {
                let ok = is_decomposed(p, off, blocks);
                off += p.dim();
                ok
            })
        }
        _ => within_one_block(offset, set.dim(), blocks),
    }
}

fn is_box_product(set: &LazySet, offset: usize, blocks: &BlockStructure) -> bool {
    match set {
        LazySet::Hyperrectangle(_) | LazySet::Singleton(_) => true,
        LazySet::CartesianProduct(c) => {
            let mut off = offset;
            c.parts().iter().all(|p| {
                let ok = is_box_product(p, off, blocks);
                off += p.dim();
                ok
            })
        }
        _ => set.dim() == 1,
    }
}

fn within_one_block(offset: usize, dim: usize, blocks: &BlockStructure) -> bool {
    if dim == 0 {
        return true;
    }
    let i = blocks.block_of(offset);
    let r = blocks.range(i);
    offset >= r.start && offset + dim <= r.end
}

/// Ingredients of the step-`k` error bound of the decomposed recurrence with
/// constant inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct DecompositionErrorReport {
    pub norm: Norm,
    /// Number of blocks `b`.
    pub blocks: usize,
    pub columns: Vec<ColumnBlockNorms>,
    /// Block diameters of the decomposed initial set.
    pub delta_x: Vec<f64>,
    /// Block diameters of the decomposed input set.
    pub delta_v: Vec<f64>,
    pub eps_x: f64,
    pub eps_v: f64,
    /// `K` and `α` with `‖Φᵏ‖ ≤ K αᵏ`.
    pub k_phi: f64,
    pub alpha_phi: f64,
}

impl DecompositionErrorReport {
    /// Report for a system with constant inputs, using `K = 1` and
    /// `α = ‖Φ‖`.
    pub fn new(sys: &DiscreteSystem, approx: BlockApprox, norm: Norm) -> Result<Self, OracleError> {
        let StepInputs::Constant(v) = &sys.inputs else {
            return Err(OracleError::InvalidArgument(
                "error report requires constant inputs".into(),
            ));
        };
        let phi = sys.phi.materialize()?;
        let bs = BlockStructure::new(sys.dim());
        let xs = approx.decompose(&sys.x_init, &bs).map_err(crate::reach::ReachError::from)?;
        let vs = approx.decompose(v, &bs).map_err(crate::reach::ReachError::from)?;
        let diam = |sets: &[Arc<LazySet>]| -> Result<Vec<f64>, OracleError> {
            sets.iter().map(|s| block_diameter(s, norm)).collect()
        };
        Ok(DecompositionErrorReport {
            norm,
            blocks: bs.count(),
            columns: column_block_alphas(&phi, norm),
            delta_x: diam(&xs)?,
            delta_v: diam(&vs)?,
            eps_x: decomposition_error_upper(&sys.x_init, &bs, approx, norm)?,
            eps_v: decomposition_error_upper(v, &bs, approx, norm)?,
            k_phi: 1.0,
            alpha_phi: phi.norm(norm.p()),
        })
    }

    pub fn with_growth(mut self, k_phi: f64, alpha_phi: f64) -> Self {
        self.k_phi = k_phi;
        self.alpha_phi = alpha_phi;
        self
    }

    pub fn delta_x_sum(&self) -> f64 {
        self.delta_x.iter().sum()
    }

    pub fn delta_v_sum(&self) -> f64 {
        self.delta_v.iter().sum()
    }

    /// Whether every column-block of `Φ` has at most one nonzero block. Such
    /// a pattern is kept by all powers, and the decomposed map is then exact.
    pub fn single_block_columns(&self) -> bool {
        self.columns.iter().all(|c| c.alpha == 0.0)
    }

    fn diameter_terms(&self) -> (f64, f64) {
        if self.single_block_columns() {
            (0.0, 0.0)
        } else {
            let b = self.blocks as f64;
            (b * self.delta_x_sum(), b * self.delta_v_sum())
        }
    }

    /// Bound valid for every `k` when `α < 1`.
    pub fn uniform_bound(&self) -> Option<f64> {
        if !(self.alpha_phi < 1.0) {
            return None;
        }
        let (dx, dv) = self.diameter_terms();
        let a = self.alpha_phi;
        Some(self.k_phi * (dx + self.eps_x + (dv + self.eps_v) * a / (1.0 - a)) + self.eps_v)
    }
}

/// `Σ_{s=1}^{k−1} αˢ`.
fn geometric_tail(alpha: f64, k: usize) -> f64 {
    if k <= 1 || alpha == 0.0 {
        return 0.0;
    }
    let m = (k - 1) as f64;
    if alpha == 1.0 {
        return m;
    }
    let l = alpha.ln();
    alpha * (m * l).exp_m1() / l.exp_m1()
}

/// Bound on `d_H(X̂(k), X(k))` for the decomposed recurrence with constant
/// inputs:
/// `K (αᵏ (bΔˣ + εˣ) + (bΔᵛ + εᵛ) Σ_{s=1}^{k−1} αˢ) + εᵛ`.
pub fn recurrence_error_bound(report: &DecompositionErrorReport, k: usize) -> f64 {
    let (dx, dv) = report.diameter_terms();
    let a = report.alpha_phi;
    report.k_phi * (a.powi(k as i32) * (dx + report.eps_x) + (dv + report.eps_v) * geometric_tail(a, k))
        + report.eps_v
}
