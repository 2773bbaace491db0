use ode_solvers::{DVector, Dop853, OutputType, System};

use crate::discretize::{ContinuousSystem, DiscreteSystem};
use crate::linalg::{BlockMatrix, LinearOperator};
use crate::sets::{LazySet, Norm};

use super::{sample_directions, OracleError};

const REL_TOL: f64 = 1e-10;
const ABS_TOL: f64 = 1e-12;
const MEMBERSHIP_SLACK: f64 = 1e-9;

/// Sampled states of a continuous trajectory.
#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

/// Axis directions plus a fixed spread of others, used to test whether a
/// point lies in a set.
pub fn membership_directions(n: usize) -> Vec<Vec<f64>> {
    sample_directions(n, 2 * n + 64, Norm::Two, 0)
}

fn check_member(
    set: &LazySet,
    x: &[f64],
    dirs: &[Vec<f64>],
    what: &'static str,
    step: usize,
) -> Result<(), OracleError> {
    if x.len() != set.dim() {
        return Err(OracleError::InvalidArgument(format!(
            "{what} has dimension {}, expected {}",
            x.len(),
            set.dim()
        )));
    }
    if set.contains_in_directions(x, dirs, MEMBERSHIP_SLACK)? {
        Ok(())
    } else {
        Err(OracleError::OutsideSet { what, step })
    }
}

fn input_at<'a>(inputs: &'a [Vec<f64>], k: usize, steps: usize) -> Result<Option<&'a [f64]>, OracleError> {
    match inputs.len() {
        0 => Ok(None),
        1 => Ok(Some(&inputs[0])),
        len if len >= steps => Ok(Some(&inputs[k])),
        len => Err(OracleError::InvalidArgument(format!(
            "{len} inputs for {steps} steps"
        ))),
    }
}

/// `x(k+1) = Φ x(k) + v(k)` for `k < steps`, returning `x(0), …, x(steps)`.
///
/// An empty input list means `v = 0`, a single input is held constant.
pub fn simulate_recurrence(
    phi: &dyn LinearOperator,
    x0: &[f64],
    inputs: &[Vec<f64>],
    steps: usize,
) -> Result<Vec<Vec<f64>>, OracleError> {
    input_at(inputs, 0, steps)?;
    let mut out = Vec::with_capacity(steps + 1);
    let mut x = x0.to_vec();
    out.push(x.clone());
    for k in 0..steps {
        x = phi.apply(&x)?;
        if let Some(v) = input_at(inputs, k, steps)? {
            if v.len() != x.len() {
                return Err(OracleError::InvalidArgument(format!(
                    "input {k} has dimension {}, expected {}",
                    v.len(),
                    x.len()
                )));
            }
            x.iter_mut().zip(v).for_each(|(a, b)| *a += b);
        }
        out.push(x.clone());
    }
    Ok(out)
}

/// [`simulate_recurrence`] on a discrete system, after checking `x0 ∈ X(0)`
/// and `v(k) ∈ V(k)`.
pub fn simulate_system(
    sys: &DiscreteSystem,
    x0: &[f64],
    inputs: &[Vec<f64>],
    steps: usize,
) -> Result<Vec<Vec<f64>>, OracleError> {
    let dirs = membership_directions(sys.dim());
    check_member(&sys.x_init, x0, &dirs, "initial state", 0)?;
    sys.check_horizon(steps + 1)?;
    let checks = if inputs.len() <= 1 && sys.inputs.is_constant() { steps.min(1) } else { steps };
    for k in 0..checks {
        if let Some(v) = input_at(inputs, k, steps)? {
            check_member(sys.inputs.at(k), v, &dirs, "input", k)?;
        }
    }
    let phi = sys.phi.operator();
    simulate_recurrence(phi.as_ref(), x0, inputs, steps)
}

struct Affine<'a> {
    a: &'a BlockMatrix,
    forcing: Vec<f64>,
}

impl System<f64, DVector<f64>> for &Affine<'_> {
    fn system(&self, _t: f64, y: &DVector<f64>, dy: &mut DVector<f64>) {
        let ay = self.a.matvec(y.as_slice());
        for ((d, a), f) in dy.iter_mut().zip(ay).zip(&self.forcing) {
            *d = a + f;
        }
    }
}

/// Integrates `ẋ = Ax + Bu` from `x0` with `u` equal to `inputs[k]` on
/// `[kδ, (k+1)δ]`, sampling `samples_per_step` equal sub-intervals of every
/// step. `x0 ∈ X₀` and `inputs[k] ∈ U(k)` are checked first.
pub fn simulate_continuous(
    sys: &ContinuousSystem,
    x0: &[f64],
    inputs: &[Vec<f64>],
    delta: f64,
    samples_per_step: usize,
) -> Result<Trajectory, OracleError> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(OracleError::InvalidArgument(format!("step {delta}")));
    }
    if samples_per_step == 0 || inputs.is_empty() {
        return Err(OracleError::InvalidArgument(
            "need at least one step and one sample per step".into(),
        ));
    }
    let n = sys.dim();
    check_member(sys.x0(), x0, &membership_directions(n), "initial state", 0)?;
    let udirs = membership_directions(sys.input_dim());
    for (k, u) in inputs.iter().enumerate() {
        check_member(sys.inputs().at(k), u, &udirs, "input", k)?;
    }

    let dt = delta / samples_per_step as f64;
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![x0.to_vec()],
    };
    // Each sample interval is integrated on its own: the solver's dense
    // output loses accuracy near the end of the range.
    for (k, u) in inputs.iter().enumerate() {
        let forcing = match sys.b() {
            Some(b) => b.matvec(u),
            None => u.clone(),
        };
        let system = Affine { a: sys.a(), forcing };
        for s in 0..samples_per_step {
            let t0 = k as f64 * delta + s as f64 * dt;
            let t1 = if s + 1 == samples_per_step { (k + 1) as f64 * delta } else { t0 + dt };
            let y0 = DVector::from_column_slice(traj.states.last().unwrap());
            let mut solver = Dop853::new(&system, t0, t1, 0.0, y0, REL_TOL, ABS_TOL);
            solver.set_output(OutputType::Sparse);
            solver
                .integrate()
                .map_err(|e| OracleError::Integration(format!("{e:?}")))?;
            let y = solver.results().get().1.last().unwrap();
            traj.times.push(t1);
            traj.states.push(y.as_slice().to_vec());
        }
    }
    Ok(traj)
}
