//! Safety properties over outputs `y = Cx + Du`, checked by evaluating support
//! functions of the uncollapsed per-step sets in the property directions only.

use std::collections::BTreeSet;
use std::sync::Arc;

use nalgebra::DMatrix;

use super::{varying_input_step, PowerSource, PowerStrategy, ReachError};
use crate::approx::{decompose, overapproximate, ApproxScheme, BlockStructure};
use crate::discretize::{DiscreteSystem, StepInputs, Transition};
use crate::linalg::DenseOperator;
use crate::sets::LazySet;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Comparison {
    Lt,
    Le,
    Gt,
    Ge,
}

/// `aᵀy ⋈ b`.
#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub coeffs: Vec<f64>,
    pub cmp: Comparison,
    pub bound: f64,
}

impl Atom {
    pub fn new(coeffs: Vec<f64>, cmp: Comparison, bound: f64) -> Self {
        Atom { coeffs, cmp, bound }
    }

    /// The atom as `cᵀy < d` (strict) or `cᵀy ≤ d`.
    fn upper_form(&self) -> (Vec<f64>, f64, bool) {
        match self.cmp {
            Comparison::Lt => (self.coeffs.clone(), self.bound, true),
            Comparison::Le => (self.coeffs.clone(), self.bound, false),
            Comparison::Gt => (self.coeffs.iter().map(|c| -c).collect(), -self.bound, true),
            Comparison::Ge => (self.coeffs.iter().map(|c| -c).collect(), -self.bound, false),
        }
    }
}

/// AND/OR combination of atoms.
#[derive(Clone, Debug, PartialEq)]
pub enum Formula {
    Atom(Atom),
    And(Vec<Formula>),
    Or(Vec<Formula>),
}

impl Formula {
    /// Atoms in left-to-right order; verdicts refer to atoms by this index.
    pub fn atoms(&self) -> Vec<&Atom> {
        let mut out = Vec::new();
        self.collect(&mut out);
        out
    }

    fn collect<'a>(&'a self, out: &mut Vec<&'a Atom>) {
        match self {
            Formula::Atom(a) => out.push(a),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|f| f.collect(out)),
        }
    }

    /// Evaluates the formula given per-atom results; returns the index of a
    /// failing atom when the formula is not certified.
    fn first_failure(&self, ok: &[bool], next: &mut usize) -> Option<usize> {
        match self {
            Formula::Atom(_) => {
                let idx = *next;
                *next += 1;
                (!ok[idx]).then_some(idx)
            }
            Formula::And(fs) => {
                let mut failure = None;
                for f in fs {
                    let r = f.first_failure(ok, next);
                    failure = failure.or(r);
                }
                failure
            }
            Formula::Or(fs) => {
                let mut failures = Vec::new();
                for f in fs {
                    failures.push(f.first_failure(ok, next));
                }
                if failures.iter().any(Option::is_none) {
                    None
                } else {
                    failures.into_iter().flatten().next()
                }
            }
        }
    }
}

/// A formula over the outputs `y = Cx + Du`; without `C` the outputs are the
/// states, without `D` there is no feedthrough.
#[derive(Clone, Debug, PartialEq)]
pub struct SafetyProperty {
    pub c: Option<DMatrix<f64>>,
    pub d: Option<DMatrix<f64>>,
    pub formula: Formula,
}

impl SafetyProperty {
    pub fn on_states(formula: Formula) -> Self {
        SafetyProperty {
            c: None,
            d: None,
            formula,
        }
    }

    fn validate(&self, n: usize, m: usize) -> Result<usize, ReachError> {
        let p = match &self.c {
            Some(c) => {
                if c.ncols() != n {
                    return Err(ReachError::Property(format!(
                        "output matrix has {} columns, the state has dimension {n}",
                        c.ncols()
                    )));
                }
                c.nrows()
            }
            None => n,
        };
        if let Some(d) = &self.d {
            if d.nrows() != p || d.ncols() != m {
                return Err(ReachError::Property(format!(
                    "feedthrough matrix must be {p}×{m}, got {}×{}",
                    d.nrows(),
                    d.ncols()
                )));
            }
        }
        for (idx, atom) in self.formula.atoms().iter().enumerate() {
            if atom.coeffs.len() != p {
                return Err(ReachError::Property(format!(
                    "atom {idx} has {} coefficients for {p} outputs",
                    atom.coeffs.len()
                )));
            }
            if atom.coeffs.iter().any(|c| !c.is_finite()) || !atom.bound.is_finite() {
                return Err(ReachError::Property(format!("atom {idx} is not finite")));
            }
        }
        Ok(p)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Verdict {
    /// Every atom combination held on all `steps` entries.
    Verified { steps: usize },
    /// The overapproximation at `step` does not certify the formula; `atom`
    /// failed with support `support` against `bound`. Not a counterexample.
    Violated {
        step: usize,
        atom: usize,
        support: f64,
        bound: f64,
    },
}

impl Verdict {
    pub fn is_verified(&self) -> bool {
        matches!(self, Verdict::Verified { .. })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckOptions {
    pub steps: usize,
    /// Scheme for the initial decomposition and for the input accumulation.
    pub scheme: ApproxScheme,
    /// Track input contributions exactly in each property direction instead
    /// of collapsing them per step (constant inputs only).
    pub lazy_inputs: bool,
    pub strategy: PowerStrategy,
}

impl CheckOptions {
    pub fn new(steps: usize) -> Self {
        CheckOptions {
            steps,
            scheme: ApproxScheme::BoxDirections,
            lazy_inputs: false,
            strategy: PowerStrategy::Auto,
        }
    }
}

/// One property direction split into its per-block state parts and its input
/// part.
struct Direction {
    state: Vec<f64>,
    input: Option<Vec<f64>>,
    bound: f64,
    strict: bool,
    blocks: Vec<usize>,
}

/// Checks `prop` on the first `opts.steps` entries, stopping at the first
/// entry where the formula is not certified.
pub fn check_property(
    sys: &DiscreteSystem,
    prop: &SafetyProperty,
    opts: &CheckOptions,
) -> Result<Verdict, ReachError> {
    if opts.steps == 0 {
        return Err(ReachError::InvalidOptions("at least one step is required".into()));
    }
    sys.check_horizon(opts.steps)?;
    let n = sys.dim();
    let bs = BlockStructure::new(n);
    let m = sys.source.input_dim();
    prop.validate(n, m)?;
    let raw_inputs = sys.source.inputs();
    if prop.d.is_some() {
        if let crate::discretize::Inputs::Sequence(us) = raw_inputs {
            if us.len() < opts.steps {
                return Err(ReachError::Property(format!(
                    "feedthrough needs {} input sets, the sequence has {}",
                    opts.steps,
                    us.len()
                )));
            }
        }
    }

    let dirs: Vec<Direction> = prop
        .formula
        .atoms()
        .iter()
        .map(|atom| {
            let (a, bound, strict) = atom.upper_form();
            let av = nalgebra::DVector::from_vec(a.clone());
            let state: Vec<f64> = match &prop.c {
                Some(c) => (c.transpose() * &av).iter().copied().collect(),
                None => a.clone(),
            };
            let input = prop
                .d
                .as_ref()
                .map(|d| (d.transpose() * &av).iter().copied().collect::<Vec<f64>>());
            let blocks = (0..bs.count())
                .filter(|&i| state[bs.range(i)].iter().any(|v| *v != 0.0))
                .collect();
            Direction {
                state,
                input,
                bound,
                strict,
                blocks,
            }
        })
        .collect();
    let tracked: Vec<usize> = dirs
        .iter()
        .flat_map(|d| d.blocks.iter().copied())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let slot = |i: usize| tracked.binary_search(&i).unwrap();

    let x0_hat = decompose(&sys.x_init, &bs, opts.scheme)?;
    let constant_v = match &sys.inputs {
        StepInputs::Constant(v) => Some(v.clone()),
        StepInputs::Sequence(_) => None,
    };
    let lazy_inputs = opts.lazy_inputs && constant_v.is_some();
    let phi_matrix = match (&sys.inputs, &sys.phi) {
        (StepInputs::Sequence(_), Transition::Explicit(m)) => Some(m.clone()),
        (StepInputs::Sequence(_), Transition::Lazy(_)) => Some(Arc::new(sys.phi.materialize()?)),
        _ => None,
    };

    // Ŵ per tracked block (constant inputs) or per block (varying inputs).
    let mut w: Vec<Arc<LazySet>> = if phi_matrix.is_some() {
        (0..bs.count()).map(|i| LazySet::zero(bs.block_dim(i))).collect()
    } else {
        tracked.iter().map(|&i| LazySet::zero(bs.block_dim(i))).collect()
    };
    // Exact input contribution per (direction, block) for lazy inputs.
    let mut w_support: Vec<Vec<f64>> = dirs.iter().map(|d| vec![0.0; d.blocks.len()]).collect();
    let mut powers = if tracked.is_empty() || opts.steps == 1 {
        None
    } else {
        Some(PowerSource::new(&sys.phi, &bs, &tracked, opts.strategy)?)
    };

    for k in 0..opts.steps {
        let rows: Vec<_> = match (&powers, k) {
            (Some(pw), k) if k > 0 => tracked.iter().enumerate().map(|(t, &i)| pw.rows(t, i)).collect(),
            _ => Vec::new(),
        };
        if k > 0 {
            if let Some(phi) = &phi_matrix {
                let v_hat = decompose(sys.inputs.at(k - 1), &bs, opts.scheme)?;
                w = varying_input_step(phi, &w, &v_hat, opts.scheme)?;
            } else if let Some(v) = &constant_v {
                let pv: Vec<Arc<LazySet>> = rows
                    .iter()
                    .map(|(p, _)| LazySet::linear_map(Arc::new(DenseOperator(p.rows.clone())), v.clone()))
                    .collect::<Result<_, _>>()?;
                if lazy_inputs {
                    for (d, acc) in dirs.iter().zip(w_support.iter_mut()) {
                        for (b, &i) in d.blocks.iter().enumerate() {
                            acc[b] += pv[slot(i)].support_function(&d.state[bs.range(i)])?;
                        }
                    }
                } else {
                    for (t, pvt) in pv.into_iter().enumerate() {
                        let sum = LazySet::minkowski_sum(w[t].clone(), pvt)?;
                        w[t] = overapproximate(&sum, opts.scheme)?;
                    }
                }
            }
        }

        let mut ok = Vec::with_capacity(dirs.len());
        let mut values = Vec::with_capacity(dirs.len());
        for (a, d) in dirs.iter().enumerate() {
            let mut value = 0.0;
            for (b, &i) in d.blocks.iter().enumerate() {
                let li = &d.state[bs.range(i)];
                if k == 0 {
                    value += x0_hat[i].support_function(li)?;
                    continue;
                }
                let (_, q) = &rows[slot(i)];
                for &j in &q.nonzero {
                    let moved = q.block(j).transpose_apply(li);
                    value += x0_hat[j].support_function(&moved[..bs.block_dim(j)])?;
                }
                value += if lazy_inputs {
                    w_support[a][b]
                } else if phi_matrix.is_some() {
                    w[i].support_function(li)?
                } else {
                    w[slot(i)].support_function(li)?
                };
            }
            if let Some(du) = &d.input {
                if du.iter().any(|v| *v != 0.0) {
                    value += raw_inputs.at(k.min(input_len(raw_inputs) - 1)).support_function(du)?;
                }
            }
            ok.push(if d.strict { value < d.bound } else { value <= d.bound });
            values.push(value);
        }
        if let Some(atom) = prop.formula.first_failure(&ok, &mut 0) {
            return Ok(Verdict::Violated {
                step: k,
                atom,
                support: values[atom],
                bound: dirs[atom].bound,
            });
        }
        if k + 1 < opts.steps {
            if let Some(pw) = powers.as_mut() {
                if k > 0 {
                    pw.advance()?;
                }
            }
        }
    }
    Ok(Verdict::Verified { steps: opts.steps })
}

fn input_len(inputs: &crate::discretize::Inputs) -> usize {
    match inputs {
        crate::discretize::Inputs::Constant(_) => 1,
        crate::discretize::Inputs::Sequence(us) => us.len(),
    }
}
