use std::sync::Arc;

use crate::discretize::{DiscreteSystem, StepInputs};
use crate::linalg::{LinalgError, LinearOperator};
use crate::par;
use crate::sets::LazySet;

use super::{check_directions, OracleError};

/// `Mᵏ` applied through repeated products with `M`.
#[derive(Debug)]
pub struct PowerOperator {
    base: Arc<dyn LinearOperator>,
    power: usize,
}

impl PowerOperator {
    pub fn new(base: Arc<dyn LinearOperator>, power: usize) -> Result<Self, LinalgError> {
        if base.nrows() != base.ncols() {
            return Err(LinalgError::NotSquare {
                rows: base.nrows(),
                cols: base.ncols(),
            });
        }
        Ok(PowerOperator { base, power })
    }
}

impl LinearOperator for PowerOperator {
    fn nrows(&self) -> usize {
        self.base.nrows()
    }
    fn ncols(&self) -> usize {
        self.base.ncols()
    }
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>, LinalgError> {
        let mut y = x.to_vec();
        for _ in 0..self.power {
            y = self.base.apply(&y)?;
        }
        Ok(y)
    }
    fn apply_transpose(&self, y: &[f64]) -> Result<Vec<f64>, LinalgError> {
        let mut x = y.to_vec();
        for _ in 0..self.power {
            x = self.base.apply_transpose(&x)?;
        }
        Ok(x)
    }
}

/// `ρ_{X(k)}(ℓ)` for `k < steps` and each direction, from the non-recursive
/// form `X(k) = Φᵏ X(0) ⊕ W(k)` without any intermediate approximation.
///
/// The result is indexed `[k][direction]`.
pub fn reach_nondecomposed(
    sys: &DiscreteSystem,
    steps: usize,
    dirs: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>, OracleError> {
    let n = sys.dim();
    check_directions(dirs, n)?;
    sys.check_horizon(steps)?;
    let phi = sys.phi.operator();
    let columns = par::try_map_slice(dirs, |d| -> Result<Vec<f64>, OracleError> {
        // adjoint[j] = (Φʲ)ᵀ ℓ
        let mut adjoint = Vec::with_capacity(steps);
        let mut r = d.clone();
        for j in 0..steps {
            if j > 0 {
                r = phi.apply_transpose(&r)?;
            }
            adjoint.push(r.clone());
        }
        let mut out = Vec::with_capacity(steps);
        match &sys.inputs {
            StepInputs::Constant(v) => {
                let mut acc = 0.0;
                for (k, a) in adjoint.iter().enumerate() {
                    out.push(sys.x_init.support_function(a)? + acc);
                    if k + 1 < steps {
                        acc += v.support_function(a)?;
                    }
                }
            }
            StepInputs::Sequence(vs) => {
                for k in 0..steps {
                    let mut val = sys.x_init.support_function(&adjoint[k])?;
                    for s in 0..k {
                        val += vs[s].support_function(&adjoint[k - 1 - s])?;
                    }
                    out.push(val);
                }
            }
        }
        Ok(out)
    })?;
    Ok((0..steps)
        .map(|k| columns.iter().map(|c| c[k]).collect())
        .collect())
}

/// `X(k)` as a flat lazy sum `Φᵏ X(0) ⊕ Σₛ Φᵏ⁻¹⁻ˢ V(s)`.
pub fn nondecomposed_set(sys: &DiscreteSystem, k: usize) -> Result<Arc<LazySet>, OracleError> {
    sys.check_horizon(k + 1)?;
    let phi = sys.phi.operator();
    let power = |j: usize, set: Arc<LazySet>| -> Result<Arc<LazySet>, OracleError> {
        if j == 0 {
            return Ok(set);
        }
        Ok(LazySet::linear_map(Arc::new(PowerOperator::new(phi.clone(), j)?), set)?)
    };
    let mut terms = vec![power(k, sys.x_init.clone())?];
    for s in 0..k {
        terms.push(power(k - 1 - s, sys.inputs.at(s).clone())?);
    }
    Ok(LazySet::minkowski_sum_array(terms)?)
}

/// `X(k)` as the nested lazy tree `Φ(⋯(Φ X(0) ⊕ V(0))⋯) ⊕ V(k−1)`.
pub fn recursive_set(sys: &DiscreteSystem, k: usize) -> Result<Arc<LazySet>, OracleError> {
    sys.check_horizon(k + 1)?;
    let phi = sys.phi.operator();
    let mut x = sys.x_init.clone();
    for s in 0..k {
        x = LazySet::minkowski_sum(LazySet::linear_map(phi.clone(), x)?, sys.inputs.at(s).clone())?;
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::BlockMatrix;
    use crate::oracle::sample_directions;
    use crate::sets::{Hyperrectangle, Norm};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn boxed(low: &[f64], high: &[f64]) -> Arc<LazySet> {
        Arc::new(Hyperrectangle::from_bounds(low, high).unwrap().into())
    }

    #[test]
    fn identity_without_inputs_is_constant() {
        let sys = DiscreteSystem::from_recurrence(
            BlockMatrix::identity(3),
            boxed(&[-1.0, 0.0, 2.0], &[1.0, 0.5, 3.0]),
            StepInputs::Constant(LazySet::zero(3)),
        )
        .unwrap();
        let dirs = sample_directions(3, 30, Norm::Two, 0);
        let rho = reach_nondecomposed(&sys, 8, &dirs).unwrap();
        for row in &rho[1..] {
            assert_eq!(row, &rho[0]);
        }
    }

    #[test]
    fn scalar_geometric_series() {
        let sys = DiscreteSystem::from_recurrence(
            BlockMatrix::from_row_slice(1, 1, &[0.5]),
            boxed(&[1.0], &[1.0]),
            StepInputs::Constant(boxed(&[0.0], &[0.1])),
        )
        .unwrap();
        let rho = reach_nondecomposed(&sys, 6, &[vec![1.0]]).unwrap();
        assert!((rho[3][0] - 0.3).abs() < 1e-12);
        for (k, row) in rho.iter().enumerate() {
            let expect = 0.5f64.powi(k as i32) + 0.1 * (0..k).map(|s| 0.5f64.powi(s as i32)).sum::<f64>();
            assert!((row[0] - expect).abs() < 1e-12);
        }
    }

    fn random_system(seed: u64, varying: bool) -> DiscreteSystem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 4;
        let data: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let mut random_box = |w: f64| {
            let lo: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let hi: Vec<f64> = lo.iter().map(|l| l + rng.gen_range(0.0..w)).collect();
            boxed(&lo, &hi)
        };
        let x0 = random_box(1.0);
        let inputs = if varying {
            StepInputs::Sequence((0..12).map(|_| random_box(0.2)).collect())
        } else {
            StepInputs::Constant(random_box(0.2))
        };
        DiscreteSystem::from_recurrence(BlockMatrix::from_row_slice(n, n, &data), x0, inputs).unwrap()
    }

    #[test]
    fn agrees_with_both_lazy_tree_shapes() {
        for (seed, varying) in [(1, false), (2, true), (3, false), (4, true)] {
            let sys = random_system(seed, varying);
            let dirs = sample_directions(4, 40, Norm::Two, seed);
            let rho = reach_nondecomposed(&sys, 12, &dirs).unwrap();
            for k in [0, 1, 5, 11] {
                let flat = nondecomposed_set(&sys, k).unwrap();
                let nested = recursive_set(&sys, k).unwrap();
                for (d, r) in dirs.iter().zip(&rho[k]) {
                    let a = flat.support_function(d).unwrap();
                    let b = nested.support_function(d).unwrap();
                    assert!((a - r).abs() < 1e-9 && (b - r).abs() < 1e-9, "k={k}: {a} {b} {r}");
                }
            }
        }
    }

    #[test]
    fn rejects_bad_directions_and_short_sequences() {
        let sys = random_system(5, true);
        assert_eq!(reach_nondecomposed(&sys, 3, &[]).unwrap_err(), OracleError::NoDirections);
        assert_eq!(
            reach_nondecomposed(&sys, 3, &[vec![1.0]]).unwrap_err().kind(),
            "dimension"
        );
        assert_eq!(
            reach_nondecomposed(&sys, 20, &[vec![1.0; 4]]).unwrap_err().kind(),
            "input_sequence"
        );
    }
}
