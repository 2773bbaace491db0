//! Convex sets represented by their support functions.
//!
//! Concrete sets (boxes, norm balls, polygons, points) evaluate support
//! functions in closed form. Operations (linear map, Minkowski sum, Cartesian
//! product, convex hull) build a tree of [`LazySet`] nodes that is only
//! evaluated when a support function is asked for.

mod polygon;

pub use polygon::{angular_cmp, HPolygon, HalfPlane};

use std::sync::Arc;

use thiserror::Error;

use crate::linalg::{LinalgError, LinearOperator, Scaling};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SetError {
    #[error("dimension mismatch in {node}: expected {expected}, found {found}")]
    DimensionMismatch {
        node: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("invalid set parameter: {0}")]
    InvalidParameter(String),
    #[error("polygon constraints are infeasible")]
    EmptyPolygon,
    #[error("unbounded set: {0}")]
    Unbounded(String),
    #[error("consecutive polygon constraints {first} and {second} are parallel")]
    DegeneratePolygon { first: usize, second: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

impl SetError {
    pub fn kind(&self) -> &'static str {
        match self {
            SetError::DimensionMismatch { .. } => "dimension",
            SetError::InvalidParameter(_) => "invalid_parameter",
            SetError::EmptyPolygon => "empty_polygon",
            SetError::Unbounded(_) => "unbounded",
            SetError::DegeneratePolygon { .. } => "degenerate_polygon",
            SetError::Linalg(e) => e.kind(),
        }
    }
}

/// The vector norms supported for balls, error bounds and distances.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Norm {
    One,
    Two,
    Inf,
}

impl Norm {
    pub fn from_p(p: f64) -> Option<Norm> {
        if p == 1.0 {
            Some(Norm::One)
        } else if p == 2.0 {
            Some(Norm::Two)
        } else if p == f64::INFINITY {
            Some(Norm::Inf)
        } else {
            None
        }
    }

    pub fn p(self) -> f64 {
        match self {
            Norm::One => 1.0,
            Norm::Two => 2.0,
            Norm::Inf => f64::INFINITY,
        }
    }

    /// The norm `q` with `1/p + 1/q = 1`.
    pub fn dual(self) -> Norm {
        match self {
            Norm::One => Norm::Inf,
            Norm::Two => Norm::Two,
            Norm::Inf => Norm::One,
        }
    }

    pub fn of(self, v: &[f64]) -> f64 {
        match self {
            Norm::One => v.iter().map(|x| x.abs()).sum(),
            Norm::Two => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
            Norm::Inf => v.iter().fold(0.0, |m, x| m.max(x.abs())),
        }
    }
}

fn check_finite(v: &[f64], what: &str) -> Result<(), SetError> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(SetError::InvalidParameter(format!("{what} has non-finite entries")))
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Axis-aligned box `{c + r ⊙ u : ‖u‖∞ ≤ 1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Hyperrectangle {
    center: Vec<f64>,
    radius: Vec<f64>,
}

impl Hyperrectangle {
    pub fn new(center: Vec<f64>, radius: Vec<f64>) -> Result<Self, SetError> {
        if center.len() != radius.len() {
            return Err(SetError::DimensionMismatch {
                node: "Hyperrectangle",
                expected: center.len(),
                found: radius.len(),
            });
        }
        check_finite(&center, "box center")?;
        check_finite(&radius, "box radius")?;
        if radius.iter().any(|r| *r < 0.0) {
            return Err(SetError::InvalidParameter("box radius must be nonnegative".into()));
        }
        Ok(Hyperrectangle { center, radius })
    }

    pub fn from_bounds(low: &[f64], high: &[f64]) -> Result<Self, SetError> {
        if low.len() != high.len() {
            return Err(SetError::DimensionMismatch {
                node: "Hyperrectangle",
                expected: low.len(),
                found: high.len(),
            });
        }
        if low.iter().zip(high).any(|(l, h)| l > h) {
            return Err(SetError::InvalidParameter("box lower bound exceeds upper bound".into()));
        }
        Hyperrectangle::new(
            low.iter().zip(high).map(|(l, h)| 0.5 * (l + h)).collect(),
            low.iter().zip(high).map(|(l, h)| 0.5 * (h - l)).collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn radius(&self) -> &[f64] {
        &self.radius
    }

    pub fn low(&self) -> Vec<f64> {
        self.center.iter().zip(&self.radius).map(|(c, r)| c - r).collect()
    }

    pub fn high(&self) -> Vec<f64> {
        self.center.iter().zip(&self.radius).map(|(c, r)| c + r).collect()
    }

    fn support_pair(&self, d: &[f64]) -> (f64, f64) {
        let lin = dot(d, &self.center);
        let spread: f64 = d.iter().zip(&self.radius).map(|(x, r)| x.abs() * r).sum();
        (lin + spread, -lin + spread)
    }

    fn support_vector(&self, d: &[f64]) -> Vec<f64> {
        self.center
            .iter()
            .zip(&self.radius)
            .zip(d)
            .map(|((c, r), x)| if *x < 0.0 { c - r } else { c + r })
            .collect()
    }

    pub fn contains(&self, x: &[f64], slack: f64) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(&self.center)
                .zip(&self.radius)
                .all(|((x, c), r)| (x - c).abs() <= r + slack)
    }
}

/// Norm ball `{c + r u : ‖u‖_p ≤ 1}` for `p ∈ {1, 2, ∞}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Ball {
    center: Vec<f64>,
    radius: f64,
    norm: Norm,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64, norm: Norm) -> Result<Self, SetError> {
        check_finite(&center, "ball center")?;
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(SetError::InvalidParameter(format!(
                "ball radius must be finite and nonnegative, got {radius}"
            )));
        }
        Ok(Ball { center, radius, norm })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn norm(&self) -> Norm {
        self.norm
    }

    fn support_pair(&self, d: &[f64]) -> (f64, f64) {
        let lin = dot(d, &self.center);
        let spread = self.radius * self.norm.dual().of(d);
        (lin + spread, -lin + spread)
    }

    fn support_vector(&self, d: &[f64]) -> Vec<f64> {
        let mut v = self.center.clone();
        match self.norm {
            Norm::Inf => {
                for (vi, di) in v.iter_mut().zip(d) {
                    *vi += if *di < 0.0 { -self.radius } else { self.radius };
                }
            }
            Norm::One => {
                if let Some((k, dk)) = d
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
                {
                    v[k] += if *dk < 0.0 { -self.radius } else { self.radius };
                }
            }
            Norm::Two => {
                let len = Norm::Two.of(d);
                if len > 0.0 {
                    for (vi, di) in v.iter_mut().zip(d) {
                        *vi += self.radius * di / len;
                    }
                }
            }
        }
        v
    }
}

/// Linear map node `M·X`.
#[derive(Clone, Debug)]
pub struct LinearMap {
    map: Arc<dyn LinearOperator>,
    set: Arc<LazySet>,
}

impl LinearMap {
    pub fn map(&self) -> &Arc<dyn LinearOperator> {
        &self.map
    }

    pub fn set(&self) -> &Arc<LazySet> {
        &self.set
    }
}

/// Cartesian product node; member dimensions are stored for splitting
/// directions.
#[derive(Clone, Debug)]
pub struct CartesianProduct {
    parts: Vec<Arc<LazySet>>,
    dims: Vec<usize>,
}

impl CartesianProduct {
    pub fn parts(&self) -> &[Arc<LazySet>] {
        &self.parts
    }
}

/// A convex set given by a tree of operations over concrete sets.
#[derive(Clone, Debug)]
pub enum LazySet {
    Hyperrectangle(Hyperrectangle),
    Ball(Ball),
    Polygon(HPolygon),
    Singleton(Vec<f64>),
    LinearMap(LinearMap),
    MinkowskiSum(Arc<LazySet>, Arc<LazySet>),
    /// Sum of many sets, evaluated without nesting binary sums.
    MinkowskiSumArray(Vec<Arc<LazySet>>),
    CartesianProduct(CartesianProduct),
    ConvexHull(Arc<LazySet>, Arc<LazySet>),
}

impl From<Hyperrectangle> for LazySet {
    fn from(h: Hyperrectangle) -> Self {
        LazySet::Hyperrectangle(h)
    }
}

impl From<Ball> for LazySet {
    fn from(b: Ball) -> Self {
        LazySet::Ball(b)
    }
}

impl From<HPolygon> for LazySet {
    fn from(p: HPolygon) -> Self {
        LazySet::Polygon(p)
    }
}

impl LazySet {
    pub fn singleton(point: Vec<f64>) -> Result<Arc<LazySet>, SetError> {
        check_finite(&point, "point")?;
        Ok(Arc::new(LazySet::Singleton(point)))
    }

    pub fn zero(n: usize) -> Arc<LazySet> {
        Arc::new(LazySet::Singleton(vec![0.0; n]))
    }

    pub fn linear_map(
        map: Arc<dyn LinearOperator>,
        set: Arc<LazySet>,
    ) -> Result<Arc<LazySet>, SetError> {
        if map.ncols() != set.dim() {
            return Err(SetError::DimensionMismatch {
                node: "LinearMap",
                expected: map.ncols(),
                found: set.dim(),
            });
        }
        Ok(Arc::new(LazySet::LinearMap(LinearMap { map, set })))
    }

    /// `λ·X`.
    pub fn scale(factor: f64, set: Arc<LazySet>) -> Result<Arc<LazySet>, SetError> {
        if !factor.is_finite() {
            return Err(SetError::InvalidParameter(format!("scale factor {factor}")));
        }
        let n = set.dim();
        LazySet::linear_map(Arc::new(Scaling { n, factor }), set)
    }

    pub fn minkowski_sum(a: Arc<LazySet>, b: Arc<LazySet>) -> Result<Arc<LazySet>, SetError> {
        if a.dim() != b.dim() {
            return Err(SetError::DimensionMismatch {
                node: "MinkowskiSum",
                expected: a.dim(),
                found: b.dim(),
            });
        }
        Ok(Arc::new(LazySet::MinkowskiSum(a, b)))
    }

    pub fn minkowski_sum_array(parts: Vec<Arc<LazySet>>) -> Result<Arc<LazySet>, SetError> {
        let Some(first) = parts.first() else {
            return Err(SetError::InvalidParameter("empty Minkowski sum".into()));
        };
        let n = first.dim();
        if let Some(bad) = parts.iter().find(|p| p.dim() != n) {
            return Err(SetError::DimensionMismatch {
                node: "MinkowskiSumArray",
                expected: n,
                found: bad.dim(),
            });
        }
        if parts.len() == 1 {
            return Ok(parts.into_iter().next().unwrap());
        }
        Ok(Arc::new(LazySet::MinkowskiSumArray(parts)))
    }

    pub fn cartesian_product(parts: Vec<Arc<LazySet>>) -> Result<Arc<LazySet>, SetError> {
        if parts.is_empty() {
            return Err(SetError::InvalidParameter("empty Cartesian product".into()));
        }
        let dims = parts.iter().map(|p| p.dim()).collect();
        Ok(Arc::new(LazySet::CartesianProduct(CartesianProduct { parts, dims })))
    }

    pub fn convex_hull(a: Arc<LazySet>, b: Arc<LazySet>) -> Result<Arc<LazySet>, SetError> {
        if a.dim() != b.dim() {
            return Err(SetError::DimensionMismatch {
                node: "ConvexHull",
                expected: a.dim(),
                found: b.dim(),
            });
        }
        Ok(Arc::new(LazySet::ConvexHull(a, b)))
    }

    pub fn dim(&self) -> usize {
        match self {
            LazySet::Hyperrectangle(h) => h.dim(),
            LazySet::Ball(b) => b.dim(),
            LazySet::Polygon(_) => 2,
            LazySet::Singleton(p) => p.len(),
            LazySet::LinearMap(m) => m.map.nrows(),
            LazySet::MinkowskiSum(a, _) => a.dim(),
            LazySet::MinkowskiSumArray(parts) => parts[0].dim(),
            LazySet::CartesianProduct(c) => c.dims.iter().sum(),
            LazySet::ConvexHull(a, _) => a.dim(),
        }
    }

    /// Name of the node type, used in error messages.
    pub fn node_name(&self) -> &'static str {
        match self {
            LazySet::Hyperrectangle(_) => "Hyperrectangle",
            LazySet::Ball(_) => "Ball",
            LazySet::Polygon(_) => "HPolygon",
            LazySet::Singleton(_) => "Singleton",
            LazySet::LinearMap(_) => "LinearMap",
            LazySet::MinkowskiSum(..) => "MinkowskiSum",
            LazySet::MinkowskiSumArray(_) => "MinkowskiSumArray",
            LazySet::CartesianProduct(_) => "CartesianProduct",
            LazySet::ConvexHull(..) => "ConvexHull",
        }
    }

    fn check_direction(&self, d: &[f64]) -> Result<(), SetError> {
        if d.len() != self.dim() {
            return Err(SetError::DimensionMismatch {
                node: self.node_name(),
                expected: self.dim(),
                found: d.len(),
            });
        }
        check_finite(d, "direction")
    }

    /// `ρ(ℓ, X) = max_{x ∈ X} ℓᵀx`.
    pub fn support_function(&self, d: &[f64]) -> Result<f64, SetError> {
        self.check_direction(d)?;
        let v = self.rho(d)?;
        if !v.is_finite() {
            return Err(SetError::Unbounded(format!(
                "support function of {} evaluated to {v}",
                self.node_name()
            )));
        }
        Ok(v)
    }

    /// `(ρ(ℓ, X), ρ(−ℓ, X))`, sharing work between the two directions where the
    /// representation allows it.
    pub fn support_pair(&self, d: &[f64]) -> Result<(f64, f64), SetError> {
        self.check_direction(d)?;
        let (a, b) = self.rho_pair(d)?;
        if !a.is_finite() || !b.is_finite() {
            return Err(SetError::Unbounded(format!(
                "support function of {} is not finite",
                self.node_name()
            )));
        }
        Ok((a, b))
    }

    /// A point of `X` attaining `ρ(ℓ, X)`.
    pub fn support_vector(&self, d: &[f64]) -> Result<Vec<f64>, SetError> {
        self.check_direction(d)?;
        self.sigma(d)
    }

    fn rho(&self, d: &[f64]) -> Result<f64, SetError> {
        Ok(match self {
            LazySet::Hyperrectangle(h) => h.support_pair(d).0,
            LazySet::Ball(b) => b.support_pair(d).0,
            LazySet::Polygon(p) => p.support_function([d[0], d[1]])?,
            LazySet::Singleton(x) => dot(d, x),
            LazySet::LinearMap(m) => m.set.rho(&m.map.apply_transpose(d)?)?,
            LazySet::MinkowskiSum(a, b) => a.rho(d)? + b.rho(d)?,
            LazySet::MinkowskiSumArray(parts) => {
                let mut s = 0.0;
                for p in parts {
                    s += p.rho(d)?;
                }
                s
            }
            LazySet::CartesianProduct(c) => {
                let mut s = 0.0;
                let mut off = 0;
                for (p, &k) in c.parts.iter().zip(&c.dims) {
                    s += p.rho(&d[off..off + k])?;
                    off += k;
                }
                s
            }
            LazySet::ConvexHull(a, b) => a.rho(d)?.max(b.rho(d)?),
        })
    }

    fn rho_pair(&self, d: &[f64]) -> Result<(f64, f64), SetError> {
        Ok(match self {
            LazySet::Hyperrectangle(h) => h.support_pair(d),
            LazySet::Ball(b) => b.support_pair(d),
            LazySet::Polygon(p) => (
                p.support_function([d[0], d[1]])?,
                p.support_function([-d[0], -d[1]])?,
            ),
            LazySet::Singleton(x) => {
                let v = dot(d, x);
                (v, -v)
            }
            LazySet::LinearMap(m) => m.set.rho_pair(&m.map.apply_transpose(d)?)?,
            LazySet::MinkowskiSum(a, b) => {
                let (a1, a2) = a.rho_pair(d)?;
                let (b1, b2) = b.rho_pair(d)?;
                (a1 + b1, a2 + b2)
            }
            LazySet::MinkowskiSumArray(parts) => {
                let mut s = (0.0, 0.0);
                for p in parts {
                    let (x, y) = p.rho_pair(d)?;
                    s.0 += x;
                    s.1 += y;
                }
                s
            }
            LazySet::CartesianProduct(c) => {
                let mut s = (0.0, 0.0);
                let mut off = 0;
                for (p, &k) in c.parts.iter().zip(&c.dims) {
                    let (x, y) = p.rho_pair(&d[off..off + k])?;
                    s.0 += x;
                    s.1 += y;
                    off += k;
                }
                s
            }
            LazySet::ConvexHull(a, b) => {
                let (a1, a2) = a.rho_pair(d)?;
                let (b1, b2) = b.rho_pair(d)?;
                (a1.max(b1), a2.max(b2))
            }
        })
    }

    fn sigma(&self, d: &[f64]) -> Result<Vec<f64>, SetError> {
        Ok(match self {
            LazySet::Hyperrectangle(h) => h.support_vector(d),
            LazySet::Ball(b) => b.support_vector(d),
            LazySet::Polygon(p) => p.support_vector([d[0], d[1]])?.to_vec(),
            LazySet::Singleton(x) => x.clone(),
            LazySet::LinearMap(m) => {
                let inner = m.set.sigma(&m.map.apply_transpose(d)?)?;
                m.map.apply(&inner)?
            }
            LazySet::MinkowskiSum(a, b) => {
                let mut v = a.sigma(d)?;
                v.iter_mut().zip(b.sigma(d)?).for_each(|(x, y)| *x += y);
                v
            }
            LazySet::MinkowskiSumArray(parts) => {
                let mut v = vec![0.0; d.len()];
                for p in parts {
                    v.iter_mut().zip(p.sigma(d)?).for_each(|(x, y)| *x += y);
                }
                v
            }
            LazySet::CartesianProduct(c) => {
                let mut v = Vec::with_capacity(d.len());
                let mut off = 0;
                for (p, &k) in c.parts.iter().zip(&c.dims) {
                    v.extend(p.sigma(&d[off..off + k])?);
                    off += k;
                }
                v
            }
            LazySet::ConvexHull(a, b) => {
                if a.rho(d)? >= b.rho(d)? {
                    a.sigma(d)?
                } else {
                    b.sigma(d)?
                }
            }
        })
    }

    /// Tightest box `[lᵢ, uᵢ]` containing the set: two support evaluations per
    /// coordinate.
    pub fn interval_hull(&self) -> Result<Hyperrectangle, SetError> {
        let n = self.dim();
        let mut low = vec![0.0; n];
        let mut high = vec![0.0; n];
        let mut e = vec![0.0; n];
        for i in 0..n {
            e[i] = 1.0;
            let (up, down) = self.support_pair(&e)?;
            e[i] = 0.0;
            high[i] = up;
            low[i] = -down;
        }
        // Rounding can make a flat box slightly inverted.
        for i in 0..n {
            if low[i] > high[i] {
                let mid = 0.5 * (low[i] + high[i]);
                low[i] = mid;
                high[i] = mid;
            }
        }
        Hyperrectangle::from_bounds(&low, &high)
    }

    /// Smallest box centred at the origin containing the set, with radius
    /// `max(|ρ(eᵢ)|, |ρ(−eᵢ)|)` per coordinate.
    pub fn symmetric_interval_hull(&self) -> Result<Hyperrectangle, SetError> {
        let n = self.dim();
        let mut radius = vec![0.0; n];
        let mut e = vec![0.0; n];
        for (i, r) in radius.iter_mut().enumerate() {
            e[i] = 1.0;
            let (up, down) = self.support_pair(&e)?;
            e[i] = 0.0;
            *r = up.max(down).max(0.0);
        }
        Hyperrectangle::new(vec![0.0; n], radius)
    }

    /// Whether every direction in `dirs` separates `x` from the set by no more
    /// than `slack`. Exact for boxes; a necessary condition in general.
    pub fn contains_in_directions(
        &self,
        x: &[f64],
        dirs: &[Vec<f64>],
        slack: f64,
    ) -> Result<bool, SetError> {
        if let LazySet::Hyperrectangle(h) = self {
            return Ok(h.contains(x, slack));
        }
        for d in dirs {
            if dot(d, x) > self.support_function(d)? + slack {
                return Ok(false);
            }
        }
        Ok(true)
    }
}
