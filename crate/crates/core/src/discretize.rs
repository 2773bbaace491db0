//! Conversion of `x' = Ax + Bu` into the recurrence `X(k+1) = Φ X(k) ⊕ V(k)`.
//!
//! Two models are supported. The dense-time model bloats the initial set and
//! the inputs so that the recurrence covers every trajectory point in each
//! interval `[kδ, (k+1)δ]`. The discrete-time model covers only the sampling
//! instants `kδ` under zero-order-hold inputs.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

use crate::linalg::{
    discretization_matrices, BlockMatrix, ExpOperator, LinalgError, LinearOperator, PhiOperator,
    SPARSE_DENSITY_LIMIT,
};
use crate::sets::{Hyperrectangle, LazySet, SetError};

/// Above this dimension `ExpMode::Auto` keeps exponentials implicit.
pub const LAZY_EXP_THRESHOLD: usize = 1000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiscretizeError {
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("input sequence has {found} sets but {needed} steps were requested")]
    SequenceTooShort { needed: usize, found: usize },
    #[error("unknown model {0:?}; expected \"dense\" or \"discrete\"")]
    UnknownModel(String),
    #[error("unknown exponential mode {0:?}; expected \"explicit\", \"lazy\" or \"auto\"")]
    UnknownExpMode(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Set(#[from] SetError),
}

impl DiscretizeError {
    pub fn kind(&self) -> &'static str {
        match self {
            DiscretizeError::Dimension { .. } => "dimension",
            DiscretizeError::SequenceTooShort { .. } => "input_sequence",
            DiscretizeError::UnknownModel(_) => "model",
            DiscretizeError::UnknownExpMode(_) => "exp_mode",
            DiscretizeError::Linalg(e) => e.kind(),
            DiscretizeError::Set(e) => e.kind(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Model {
    /// Covers all times `t ∈ [0, Nδ]`.
    Dense,
    /// Covers only the sampling instants `kδ`.
    Discrete,
}

impl FromStr for Model {
    type Err = DiscretizeError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dense" | "continuous" => Ok(Model::Dense),
            "discrete" => Ok(Model::Discrete),
            _ => Err(DiscretizeError::UnknownModel(s.to_string())),
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Model::Dense => "dense",
            Model::Discrete => "discrete",
        })
    }
}

/// Whether `Φ = e^{Aδ}` is formed as a matrix or applied through Krylov
/// projections.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ExpMode {
    Explicit,
    Lazy,
    #[default]
    Auto,
}

impl FromStr for ExpMode {
    type Err = DiscretizeError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "explicit" | "dense" => Ok(ExpMode::Explicit),
            "lazy" | "krylov" => Ok(ExpMode::Lazy),
            "auto" => Ok(ExpMode::Auto),
            _ => Err(DiscretizeError::UnknownExpMode(s.to_string())),
        }
    }
}

/// Input sets, either one set for all time or one per step.
#[derive(Clone, Debug)]
pub enum Inputs {
    Constant(Arc<LazySet>),
    Sequence(Vec<Arc<LazySet>>),
}

impl Inputs {
    pub fn at(&self, k: usize) -> &Arc<LazySet> {
        match self {
            Inputs::Constant(u) => u,
            Inputs::Sequence(us) => &us[k],
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Inputs::Constant(_))
    }

    fn dim(&self) -> Option<usize> {
        match self {
            Inputs::Constant(u) => Some(u.dim()),
            Inputs::Sequence(us) => us.first().map(|u| u.dim()),
        }
    }
}

/// `x' = Ax + Bu`, `x(0) ∈ X₀`, `u(t) ∈ U`. Without `B` the inputs live in the
/// state space.
#[derive(Clone, Debug)]
pub struct ContinuousSystem {
    a: BlockMatrix,
    b: Option<BlockMatrix>,
    x0: Arc<LazySet>,
    inputs: Inputs,
}

impl ContinuousSystem {
    pub fn new(
        a: BlockMatrix,
        b: Option<BlockMatrix>,
        x0: Arc<LazySet>,
        inputs: Inputs,
    ) -> Result<Self, DiscretizeError> {
        if !a.is_square() {
            return Err(LinalgError::NotSquare {
                rows: a.nrows(),
                cols: a.ncols(),
            }
            .into());
        }
        if !a.is_finite() {
            return Err(LinalgError::NonFinite("state matrix").into());
        }
        let n = a.nrows();
        if x0.dim() != n {
            return Err(DiscretizeError::Dimension {
                what: "initial set",
                expected: n,
                found: x0.dim(),
            });
        }
        let m = match &b {
            Some(b) => {
                if b.nrows() != n {
                    return Err(DiscretizeError::Dimension {
                        what: "input matrix rows",
                        expected: n,
                        found: b.nrows(),
                    });
                }
                if !b.is_finite() {
                    return Err(LinalgError::NonFinite("input matrix").into());
                }
                b.ncols()
            }
            None => n,
        };
        if let Inputs::Sequence(us) = &inputs {
            if us.is_empty() {
                return Err(DiscretizeError::SequenceTooShort { needed: 1, found: 0 });
            }
        }
        let found = inputs.dim().unwrap_or(m);
        if let Inputs::Sequence(us) = &inputs {
            if let Some(u) = us.iter().find(|u| u.dim() != m) {
                return Err(DiscretizeError::Dimension {
                    what: "input set",
                    expected: m,
                    found: u.dim(),
                });
            }
        }
        if found != m {
            return Err(DiscretizeError::Dimension {
                what: "input set",
                expected: m,
                found,
            });
        }
        Ok(ContinuousSystem { a, b, x0, inputs })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn a(&self) -> &BlockMatrix {
        &self.a
    }

    pub fn b(&self) -> Option<&BlockMatrix> {
        self.b.as_ref()
    }

    pub fn x0(&self) -> &Arc<LazySet> {
        &self.x0
    }

    pub fn inputs(&self) -> &Inputs {
        &self.inputs
    }

    /// Input dimension `m`.
    pub fn input_dim(&self) -> usize {
        self.b.as_ref().map_or(self.dim(), |b| b.ncols())
    }

    /// `B·U` (or `U` when there is no input matrix).
    fn state_input(&self, u: &Arc<LazySet>) -> Result<Arc<LazySet>, SetError> {
        match &self.b {
            Some(b) => LazySet::linear_map(Arc::new(b.clone()), u.clone()),
            None => Ok(u.clone()),
        }
    }
}

/// The transition matrix `Φ`, explicit or implicit.
#[derive(Clone, Debug)]
pub enum Transition {
    Explicit(Arc<BlockMatrix>),
    Lazy(Arc<ExpOperator>),
}

impl Transition {
    pub fn dim(&self) -> usize {
        match self {
            Transition::Explicit(m) => m.nrows(),
            Transition::Lazy(e) => e.nrows(),
        }
    }

    pub fn operator(&self) -> Arc<dyn LinearOperator> {
        match self {
            Transition::Explicit(m) => m.clone(),
            Transition::Lazy(e) => e.clone(),
        }
    }

    pub fn explicit(&self) -> Option<&Arc<BlockMatrix>> {
        match self {
            Transition::Explicit(m) => Some(m),
            Transition::Lazy(_) => None,
        }
    }

    /// `Φ` as a matrix, computing each column through the operator when it is
    /// implicit.
    pub fn materialize(&self) -> Result<BlockMatrix, LinalgError> {
        match self {
            Transition::Explicit(m) => Ok(m.as_ref().clone()),
            Transition::Lazy(e) => {
                let n = e.nrows();
                let cols = crate::par::try_map_range(n, |j| {
                    let mut unit = vec![0.0; n];
                    unit[j] = 1.0;
                    e.apply(&unit)
                })?;
                let mut dense = nalgebra::DMatrix::<f64>::zeros(n, n);
                for (j, c) in cols.iter().enumerate() {
                    dense.column_mut(j).copy_from_slice(c);
                }
                Ok(sparsify(BlockMatrix::dense(dense)))
            }
        }
    }
}

/// Per-step inputs `V` of the recurrence.
#[derive(Clone, Debug)]
pub enum StepInputs {
    Constant(Arc<LazySet>),
    Sequence(Vec<Arc<LazySet>>),
}

impl StepInputs {
    pub fn at(&self, k: usize) -> &Arc<LazySet> {
        match self {
            StepInputs::Constant(v) => v,
            StepInputs::Sequence(vs) => &vs[k],
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, StepInputs::Constant(_))
    }

    pub fn len(&self) -> Option<usize> {
        match self {
            StepInputs::Constant(_) => None,
            StepInputs::Sequence(vs) => Some(vs.len()),
        }
    }
}

/// `X(k+1) = Φ X(k) ⊕ V(k)` with its source system.
#[derive(Clone, Debug)]
pub struct DiscreteSystem {
    pub phi: Transition,
    pub x_init: Arc<LazySet>,
    pub inputs: StepInputs,
    pub delta: f64,
    pub model: Model,
    pub source: ContinuousSystem,
}

impl DiscreteSystem {
    pub fn dim(&self) -> usize {
        self.phi.dim()
    }

    /// Builds a discrete system directly from `Φ`, an initial set and per-step
    /// inputs.
    pub fn from_recurrence(
        phi: BlockMatrix,
        x_init: Arc<LazySet>,
        inputs: StepInputs,
    ) -> Result<Self, DiscretizeError> {
        if !phi.is_square() {
            return Err(LinalgError::NotSquare {
                rows: phi.nrows(),
                cols: phi.ncols(),
            }
            .into());
        }
        let n = phi.nrows();
        let source_inputs = match &inputs {
            StepInputs::Constant(v) => Inputs::Constant(v.clone()),
            StepInputs::Sequence(vs) => Inputs::Sequence(vs.clone()),
        };
        let source = ContinuousSystem::new(BlockMatrix::zeros(n, n), None, x_init.clone(), source_inputs)?;
        Ok(DiscreteSystem {
            phi: Transition::Explicit(Arc::new(phi)),
            x_init,
            inputs,
            delta: 1.0,
            model: Model::Discrete,
            source,
        })
    }

    /// Checks that enough input sets are available for `steps` entries.
    pub fn check_horizon(&self, steps: usize) -> Result<(), DiscretizeError> {
        if let Some(len) = self.inputs.len() {
            let needed = steps.saturating_sub(1);
            if len < needed {
                return Err(DiscretizeError::SequenceTooShort { needed, found: len });
            }
        }
        Ok(())
    }
}

/// Stores a matrix in sparse form when few of its 2×2 blocks are nonzero.
pub fn sparsify(m: BlockMatrix) -> BlockMatrix {
    if !m.is_sparse() && m.block_density() <= SPARSE_DENSITY_LIMIT {
        BlockMatrix::sparse(m.to_sparse())
    } else {
        m
    }
}

fn use_lazy(mode: ExpMode, n: usize) -> bool {
    match mode {
        ExpMode::Explicit => false,
        ExpMode::Lazy => true,
        ExpMode::Auto => n > LAZY_EXP_THRESHOLD,
    }
}

/// `⊡(M ⊡(S))` for a nonnegative `M`: a box centred at the origin with radius
/// `M h`, where `h` is the radius of the symmetric interval hull of `S`.
fn boxed_nonnegative_map(m: &dyn LinearOperator, s: &LazySet) -> Result<Hyperrectangle, DiscretizeError> {
    let h = s.symmetric_interval_hull()?;
    let r = m.apply(h.radius())?;
    // Rounding in an implicit operator can produce tiny negative entries.
    let r = r.into_iter().map(|x| x.max(0.0)).collect();
    Ok(Hyperrectangle::new(vec![0.0; s.dim()], r)?)
}

/// Discretizes `sys` with step `delta` for `steps` recurrence entries.
pub fn discretize(
    sys: &ContinuousSystem,
    delta: f64,
    model: Model,
    mode: ExpMode,
    steps: usize,
) -> Result<DiscreteSystem, DiscretizeError> {
    crate::linalg::check_step(delta)?;
    let discrete = match model {
        Model::Dense => discretize_dense(sys, delta, mode)?,
        Model::Discrete => discretize_discrete(sys, delta, mode)?,
    };
    discrete.check_horizon(steps)?;
    Ok(discrete)
}

/// Dense-time model:
/// `X(0) = CH(X₀, ΦX₀ ⊕ δBU ⊕ E_ψ ⊕ E⁺)`, `V = δBU ⊕ E_ψ` with
/// `E_ψ = ⊡(Φ₂(|A|, δ) ⊡(A BU))` and `E⁺ = ⊡(Φ₂(|A|, δ) ⊡(A² X₀))`.
///
/// With an input sequence `U(0), …, U(N−1)` (input `U(k)` held on
/// `[kδ, (k+1)δ)`), `X(0)` uses `U(0)` and `V(k)` uses `CH(U(k), U(k+1))`, so
/// `N` input sets are needed for `N` entries.
pub fn discretize_dense(
    sys: &ContinuousSystem,
    delta: f64,
    mode: ExpMode,
) -> Result<DiscreteSystem, DiscretizeError> {
    let n = sys.dim();
    let lazy = use_lazy(mode, n);
    let a_abs = sys.a.abs();
    let (phi, phi2_abs): (Transition, Arc<dyn LinearOperator>) = if lazy {
        (
            Transition::Lazy(Arc::new(ExpOperator::new(&sys.a, delta)?)),
            Arc::new(PhiOperator::new(&a_abs, delta, 2)?),
        )
    } else {
        let d = discretization_matrices(&sys.a, delta)?;
        let dabs = discretization_matrices(&a_abs, delta)?;
        (
            Transition::Explicit(Arc::new(sparsify(d.phi))),
            Arc::new(sparsify(dabs.phi2)),
        )
    };
    let a_op: Arc<dyn LinearOperator> = Arc::new(sys.a.clone());

    let input_terms = |u: &Arc<LazySet>| -> Result<(Arc<LazySet>, Arc<LazySet>), DiscretizeError> {
        let bu = sys.state_input(u)?;
        let abu = LazySet::linear_map(a_op.clone(), bu.clone())?;
        let e_psi: Arc<LazySet> = Arc::new(boxed_nonnegative_map(phi2_abs.as_ref(), &abu)?.into());
        let scaled = LazySet::scale(delta, bu)?;
        Ok((scaled, e_psi))
    };

    let a2x0 = LazySet::linear_map(
        a_op.clone(),
        LazySet::linear_map(a_op.clone(), sys.x0.clone())?,
    )?;
    let e_plus: Arc<LazySet> = Arc::new(boxed_nonnegative_map(phi2_abs.as_ref(), &a2x0)?.into());

    let (first_scaled, first_psi) = input_terms(sys.inputs.at(0))?;
    let moved = LazySet::linear_map(phi.operator(), sys.x0.clone())?;
    let reach_end = LazySet::minkowski_sum_array(vec![
        moved,
        first_scaled.clone(),
        first_psi.clone(),
        e_plus,
    ])?;
    let x_init = LazySet::convex_hull(sys.x0.clone(), reach_end)?;

    let inputs = match &sys.inputs {
        Inputs::Constant(_) => StepInputs::Constant(LazySet::minkowski_sum(first_scaled, first_psi)?),
        Inputs::Sequence(us) => {
            // A time interval shifted by δ straddles two input periods, so
            // V(k) is built from the hull of U(k) and U(k+1).
            let mut vs = Vec::with_capacity(us.len().saturating_sub(1));
            for pair in us.windows(2) {
                let hull = LazySet::convex_hull(pair[0].clone(), pair[1].clone())?;
                let (s, e) = input_terms(&hull)?;
                vs.push(LazySet::minkowski_sum(s, e)?);
            }
            StepInputs::Sequence(vs)
        }
    };
    Ok(DiscreteSystem {
        phi,
        x_init,
        inputs,
        delta,
        model: Model::Dense,
        source: sys.clone(),
    })
}

/// Discrete-time model: `X(0) = X₀` (the same object), `V = Φ₁(A, δ) BU`.
pub fn discretize_discrete(
    sys: &ContinuousSystem,
    delta: f64,
    mode: ExpMode,
) -> Result<DiscreteSystem, DiscretizeError> {
    let n = sys.dim();
    let (phi, phi1): (Transition, Arc<dyn LinearOperator>) = if use_lazy(mode, n) {
        (
            Transition::Lazy(Arc::new(ExpOperator::new(&sys.a, delta)?)),
            Arc::new(PhiOperator::new(&sys.a, delta, 1)?),
        )
    } else {
        let d = discretization_matrices(&sys.a, delta)?;
        (
            Transition::Explicit(Arc::new(sparsify(d.phi))),
            Arc::new(sparsify(d.phi1)),
        )
    };
    let input = |u: &Arc<LazySet>| -> Result<Arc<LazySet>, DiscretizeError> {
        Ok(LazySet::linear_map(phi1.clone(), sys.state_input(u)?)?)
    };
    let inputs = match &sys.inputs {
        Inputs::Constant(u) => StepInputs::Constant(input(u)?),
        Inputs::Sequence(us) => StepInputs::Sequence(us.iter().map(input).collect::<Result<_, _>>()?),
    };
    Ok(DiscreteSystem {
        phi,
        x_init: sys.x0.clone(),
        inputs,
        delta,
        model: Model::Discrete,
        source: sys.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sets::{Ball, Norm};

    fn unit_box(n: usize) -> Arc<LazySet> {
        Arc::new(Hyperrectangle::new(vec![0.0; n], vec![1.0; n]).unwrap().into())
    }

    #[test]
    fn discrete_model_keeps_initial_set() {
        let a = BlockMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let x0 = unit_box(2);
        let sys = ContinuousSystem::new(a, None, x0.clone(), Inputs::Constant(LazySet::zero(2))).unwrap();
        let d = discretize(&sys, 0.1, Model::Discrete, ExpMode::Explicit, 10).unwrap();
        assert!(Arc::ptr_eq(&d.x_init, &x0));
    }

    #[test]
    fn zero_dynamics_dense_model() {
        // With A = 0 every correction term vanishes: X(0) = CH(X₀, X₀ ⊕ δU).
        let sys = ContinuousSystem::new(
            BlockMatrix::zeros(2, 2),
            None,
            unit_box(2),
            Inputs::Constant(Arc::new(Ball::new(vec![0.0, 0.0], 1.0, Norm::Inf).unwrap().into())),
        )
        .unwrap();
        let d = discretize(&sys, 0.5, Model::Dense, ExpMode::Explicit, 3).unwrap();
        assert_eq!(d.x_init.support_function(&[1.0, 0.0]).unwrap(), 1.5);
        assert_eq!(d.inputs.at(0).support_function(&[0.0, -1.0]).unwrap(), 0.5);
    }

    #[test]
    fn lazy_and_explicit_agree() {
        let a = BlockMatrix::from_row_slice(3, 3, &[-1.0, 2.0, 0.0, -2.0, -1.0, 0.5, 0.0, 0.3, -0.2]);
        let b = BlockMatrix::from_row_slice(3, 1, &[1.0, 0.0, 0.5]);
        let u: Arc<LazySet> = Arc::new(Hyperrectangle::new(vec![0.2], vec![0.1]).unwrap().into());
        let sys = ContinuousSystem::new(a, Some(b), unit_box(3), Inputs::Constant(u)).unwrap();
        for model in [Model::Dense, Model::Discrete] {
            let e = discretize(&sys, 0.05, model, ExpMode::Explicit, 2).unwrap();
            let l = discretize(&sys, 0.05, model, ExpMode::Lazy, 2).unwrap();
            for d in [[1.0, 0.0, 0.0], [0.3, -1.0, 2.0], [0.0, 0.0, -1.0]] {
                let x = e.x_init.support_function(&d).unwrap();
                let y = l.x_init.support_function(&d).unwrap();
                assert!((x - y).abs() < 1e-10, "{model}: {x} vs {y}");
                let x = e.inputs.at(0).support_function(&d).unwrap();
                let y = l.inputs.at(0).support_function(&d).unwrap();
                assert!((x - y).abs() < 1e-10, "{model}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn input_errors() {
        let a = BlockMatrix::zeros(2, 2);
        let b = BlockMatrix::zeros(2, 1);
        let err = ContinuousSystem::new(a.clone(), Some(b), unit_box(2), Inputs::Constant(unit_box(2))).unwrap_err();
        assert!(matches!(err, DiscretizeError::Dimension { what: "input set", .. }));
        let sys = ContinuousSystem::new(a, None, unit_box(2), Inputs::Sequence(vec![unit_box(2); 3])).unwrap();
        let err = discretize(&sys, 0.1, Model::Discrete, ExpMode::Explicit, 10).unwrap_err();
        assert_eq!(err, DiscretizeError::SequenceTooShort { needed: 9, found: 3 });
        let err = discretize(&sys, 0.1, Model::Dense, ExpMode::Explicit, 4).unwrap_err();
        assert_eq!(err, DiscretizeError::SequenceTooShort { needed: 3, found: 2 });
        assert!(discretize(&sys, 0.1, Model::Dense, ExpMode::Explicit, 3).is_ok());
        assert!(matches!(
            discretize(&sys, -1.0, Model::Dense, ExpMode::Auto, 2),
            Err(DiscretizeError::Linalg(LinalgError::InvalidStep(_)))
        ));
    }
}
