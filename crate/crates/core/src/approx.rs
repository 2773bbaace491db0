//! Projection of high-dimensional sets onto 2D blocks and overapproximation of
//! each projection by a box or a polygon.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

use crate::linalg::{block_count, block_range, Projection};
use crate::par;
use crate::sets::{angular_cmp, HPolygon, HalfPlane, Hyperrectangle, LazySet, SetError};

/// Largest number of constraints an ε-close polygon may use.
pub const MAX_POLYGON_CONSTRAINTS: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ApproxError {
    #[error("unknown approximation scheme {0:?}; expected \"box\" or \"eps:<value>\"")]
    InvalidScheme(String),
    #[error("ε-close approximation with ε = {eps:e} needs more than {budget} constraints")]
    BudgetExceeded { eps: f64, budget: usize },
    #[error("block partition does not cover dimension {expected} (got {found})")]
    Partition { expected: usize, found: usize },
    #[error(transparent)]
    Set(#[from] SetError),
}

impl ApproxError {
    pub fn kind(&self) -> &'static str {
        match self {
            ApproxError::InvalidScheme(_) => "invalid_scheme",
            ApproxError::BudgetExceeded { .. } => "budget",
            ApproxError::Partition { .. } => "partition",
            ApproxError::Set(e) => e.kind(),
        }
    }
}

/// Partition of `ℝⁿ` into consecutive blocks of size two, the last one of
/// size one when `n` is odd.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockStructure {
    n: usize,
}

impl BlockStructure {
    pub fn new(n: usize) -> Self {
        BlockStructure { n }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn count(&self) -> usize {
        block_count(self.n)
    }

    pub fn range(&self, i: usize) -> Range<usize> {
        block_range(i, self.n)
    }

    pub fn block_dim(&self, i: usize) -> usize {
        self.range(i).len()
    }

    /// Block holding coordinate `var` (0-based).
    pub fn block_of(&self, var: usize) -> usize {
        var / 2
    }

    pub fn projection(&self, i: usize) -> Projection {
        Projection::new(self.n, self.range(i))
    }
}

/// How each 2D projection is overapproximated.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum ApproxScheme {
    #[default]
    /// Tightest axis-aligned box, from support functions along `±e₁, ±e₂`.
    BoxDirections,
    /// Polygon within Hausdorff distance `ε` (Euclidean) of the projection.
    EpsilonClose(f64),
}

impl FromStr for ApproxScheme {
    type Err = ApproxError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("box") {
            return Ok(ApproxScheme::BoxDirections);
        }
        if let Some(v) = t.strip_prefix("eps:") {
            if let Ok(eps) = v.trim().parse::<f64>() {
                if eps > 0.0 && eps.is_finite() {
                    return Ok(ApproxScheme::EpsilonClose(eps));
                }
            }
        }
        Err(ApproxError::InvalidScheme(s.to_string()))
    }
}

impl fmt::Display for ApproxScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ApproxScheme::BoxDirections => write!(f, "box"),
            ApproxScheme::EpsilonClose(e) => write!(f, "eps:{e}"),
        }
    }
}

/// Overapproximates a set of dimension 1 or 2 with the given scheme. One-
/// dimensional sets always become intervals.
pub fn overapproximate(set: &LazySet, scheme: ApproxScheme) -> Result<Arc<LazySet>, ApproxError> {
    if set.dim() != 2 {
        return Ok(Arc::new(LazySet::Hyperrectangle(set.interval_hull()?)));
    }
    match scheme {
        ApproxScheme::BoxDirections => Ok(Arc::new(LazySet::Hyperrectangle(set.interval_hull()?))),
        ApproxScheme::EpsilonClose(eps) => Ok(Arc::new(LazySet::Polygon(epsilon_close(set, eps)?))),
    }
}

#[derive(Clone, Copy)]
struct SupportLine {
    dir: [f64; 2],
    value: f64,
    point: [f64; 2],
}

fn support_line(set: &LazySet, dir: [f64; 2]) -> Result<SupportLine, SetError> {
    let len = dir[0].hypot(dir[1]);
    let dir = [dir[0] / len, dir[1] / len];
    let p = set.support_vector(&dir)?;
    let point = [p[0], p[1]];
    // The support value from the support vector keeps line and point
    // consistent even when the two are computed with different rounding.
    let value = set.support_function(&dir)?.max(dir[0] * point[0] + dir[1] * point[1]);
    Ok(SupportLine { dir, value, point })
}

fn line_intersection(a: &SupportLine, b: &SupportLine) -> Option<[f64; 2]> {
    let det = a.dir[0] * b.dir[1] - a.dir[1] * b.dir[0];
    if det.abs() < 1e-14 {
        return None;
    }
    Some([
        (a.value * b.dir[1] - b.value * a.dir[1]) / det,
        (a.dir[0] * b.value - b.dir[0] * a.value) / det,
    ])
}

fn distance_to_segment(q: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let aq = [q[0] - a[0], q[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 {
        ((aq[0] * ab[0] + aq[1] * ab[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (aq[0] - t * ab[0]).hypot(aq[1] - t * ab[1])
}

/// Outer polygon from support lines whose inner counterpart, the convex hull of
/// the support vectors, is within `eps` of every outer vertex.
///
/// Each wedge between consecutive directions is refined along the normal of
/// the chord joining its two support vectors until the outer vertex of the
/// wedge is within `eps` of that chord.
pub fn epsilon_close(set: &LazySet, eps: f64) -> Result<HPolygon, ApproxError> {
    if set.dim() != 2 {
        return Err(SetError::DimensionMismatch {
            node: "EpsilonClose",
            expected: 2,
            found: set.dim(),
        }
        .into());
    }
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(ApproxError::InvalidScheme(format!("eps:{eps}")));
    }
    let start = [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]];
    let mut done: Vec<SupportLine> = Vec::new();
    // Pending wedges as (left, right) in counter-clockwise order.
    let lines: Vec<SupportLine> = start
        .iter()
        .map(|d| support_line(set, *d))
        .collect::<Result<_, _>>()?;
    let mut stack: Vec<(SupportLine, SupportLine)> =
        (0..4).rev().map(|i| (lines[i], lines[(i + 1) % 4])).collect();
    while let Some((a, b)) = stack.pop() {
        if done.len() + stack.len() + 1 > MAX_POLYGON_CONSTRAINTS {
            return Err(ApproxError::BudgetExceeded {
                eps,
                budget: MAX_POLYGON_CONSTRAINTS,
            });
        }
        let gap = line_intersection(&a, &b)
            .map(|q| distance_to_segment(q, a.point, b.point))
            .unwrap_or(0.0);
        let chord = [b.point[0] - a.point[0], b.point[1] - a.point[1]];
        let mut normal = [chord[1], -chord[0]];
        let wedge_ok = normal[0] * a.dir[1] - normal[1] * a.dir[0] < 0.0
            && b.dir[0] * normal[1] - b.dir[1] * normal[0] < 0.0;
        if gap <= eps || !wedge_ok {
            if gap > eps {
                // Chord normal fell outside the wedge; bisect the directions.
                normal = [a.dir[0] + b.dir[0], a.dir[1] + b.dir[1]];
                if normal[0].hypot(normal[1]) < 1e-12 {
                    done.push(a);
                    continue;
                }
            } else {
                done.push(a);
                continue;
            }
        }
        let mid = support_line(set, normal)?;
        stack.push((mid, b));
        stack.push((a, mid));
    }
    let mut constraints: Vec<HalfPlane> = done
        .iter()
        .map(|l| HalfPlane {
            normal: l.dir,
            offset: l.value,
        })
        .collect();
    constraints.sort_by(|x, y| angular_cmp(x.normal, y.normal));
    Ok(HPolygon::from_sorted_support_lines(constraints))
}

/// Projection of `set` onto the coordinates of block `i`, using exact
/// sub-boxes or Cartesian factors when the representation allows it.
pub fn project_block(
    set: &Arc<LazySet>,
    blocks: &BlockStructure,
    i: usize,
) -> Result<Arc<LazySet>, ApproxError> {
    let range = blocks.range(i);
    match set.as_ref() {
        LazySet::Hyperrectangle(h) => Ok(Arc::new(LazySet::Hyperrectangle(Hyperrectangle::new(
            h.center()[range.clone()].to_vec(),
            h.radius()[range].to_vec(),
        )?))),
        LazySet::Singleton(x) => Ok(Arc::new(LazySet::Singleton(x[range].to_vec()))),
        LazySet::CartesianProduct(c) => {
            let mut off = 0;
            for p in c.parts() {
                let k = p.dim();
                if off == range.start && k == range.len() {
                    return Ok(p.clone());
                }
                off += k;
            }
            Ok(LazySet::linear_map(Arc::new(blocks.projection(i)), set.clone())?)
        }
        _ => Ok(LazySet::linear_map(Arc::new(blocks.projection(i)), set.clone())?),
    }
}

/// Cartesian decomposition `(πᵢ X)ᵢ`, each projection overapproximated by the
/// scheme. Blocks are processed in parallel.
pub fn decompose(
    set: &Arc<LazySet>,
    blocks: &BlockStructure,
    scheme: ApproxScheme,
) -> Result<Vec<Arc<LazySet>>, ApproxError> {
    if set.dim() != blocks.dim() {
        return Err(ApproxError::Partition {
            expected: set.dim(),
            found: blocks.dim(),
        });
    }
    par::try_map_range(blocks.count(), |i| {
        let proj = project_block(set, blocks, i)?;
        if is_concrete_block(&proj, scheme) {
            Ok(proj)
        } else {
            overapproximate(&proj, scheme)
        }
    })
}

/// Whether a projection already has the target representation.
fn is_concrete_block(set: &LazySet, scheme: ApproxScheme) -> bool {
    matches!(
        (set, scheme),
        (LazySet::Hyperrectangle(_), _) | (LazySet::Polygon(_), ApproxScheme::EpsilonClose(_))
    )
}

/// Projections onto blocks without overapproximation, for analyses that keep
/// everything lazy.
pub fn decompose_lazy(
    set: &Arc<LazySet>,
    blocks: &BlockStructure,
) -> Result<Vec<Arc<LazySet>>, ApproxError> {
    (0..blocks.count()).map(|i| project_block(set, blocks, i)).collect()
}

/// `X̂₁ × ⋯ × X̂_b` as a single set.
pub fn compose(blocks: &[Arc<LazySet>]) -> Result<Arc<LazySet>, ApproxError> {
    Ok(LazySet::cartesian_product(blocks.to_vec())?)
}
