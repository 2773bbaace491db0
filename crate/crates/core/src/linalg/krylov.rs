//! Action of the matrix exponential on a vector via Arnoldi projection.
//!
//! The Krylov basis grows until the a posteriori error estimate for the
//! remaining interval falls below tolerance or the dimension limit is hit; in
//! the latter case the interval is split and integration proceeds in substeps.

use nalgebra::DMatrix;

use super::{dot, expm_dense, norm2, LinalgError, LinearOperator};

#[derive(Clone, Copy, Debug)]
pub struct KrylovOptions {
    /// Maximum Krylov subspace dimension.
    pub max_dim: usize,
    /// Relative error tolerance per substep.
    pub tol: f64,
    /// Maximum number of accepted or rejected substeps.
    pub max_substeps: usize,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        KrylovOptions {
            max_dim: 30,
            tol: 1e-12,
            max_substeps: 10_000,
        }
    }
}

/// `e^{Aδ} v` with default options.
pub fn exp_action(a: &dyn LinearOperator, v: &[f64], delta: f64) -> Result<Vec<f64>, LinalgError> {
    exp_action_with(a, v, delta, &KrylovOptions::default())
}

struct Projection {
    basis: Vec<Vec<f64>>,
    hess: DMatrix<f64>,
    dim: usize,
    next_norm: f64,
    happy: bool,
}

pub fn exp_action_with(
    a: &dyn LinearOperator,
    v: &[f64],
    delta: f64,
    opts: &KrylovOptions,
) -> Result<Vec<f64>, LinalgError> {
    let n = a.ncols();
    if a.nrows() != n {
        return Err(LinalgError::NotSquare {
            rows: a.nrows(),
            cols: n,
        });
    }
    if v.len() != n {
        return Err(LinalgError::DimensionMismatch {
            context: "exponential action vector",
            expected: n,
            found: v.len(),
        });
    }
    if !delta.is_finite() {
        return Err(LinalgError::InvalidStep(delta));
    }
    let mut w = v.to_vec();
    if delta == 0.0 || n == 0 {
        return Ok(w);
    }
    let sign = delta.signum();
    let target = delta.abs();
    let mut t = 0.0;
    let mut tau = target;
    let mut substeps = 0usize;

    while t < target {
        let beta = norm2(&w);
        if beta == 0.0 {
            return Ok(w);
        }
        let remaining = target - t;
        tau = tau.min(remaining);
        let proj = arnoldi(a, &w, beta, sign * tau, opts)?;
        loop {
            substeps += 1;
            if substeps > opts.max_substeps {
                return Err(LinalgError::KrylovBudget {
                    tol: opts.tol,
                    budget: opts.max_substeps,
                    reached: t,
                    target,
                });
            }
            let (coeffs, err) = evaluate(&proj, sign * tau)?;
            if proj.happy || err <= opts.tol {
                w = combine(&proj.basis, &coeffs, beta, n);
                t += tau;
                if !proj.happy && err > 0.0 {
                    let grow = 0.9 * (opts.tol / err).powf(1.0 / proj.dim as f64);
                    tau *= grow.clamp(1.0, 2.0);
                } else {
                    tau = target - t;
                }
                break;
            }
            let shrink = 0.9 * (opts.tol / err).powf(1.0 / proj.dim as f64);
            tau *= shrink.clamp(0.1, 0.5);
        }
        if w.iter().any(|x| !x.is_finite()) {
            return Err(LinalgError::NonFinite("exponential action"));
        }
    }
    Ok(w)
}

/// Builds the Arnoldi decomposition for `w`, stopping early once the error
/// estimate for step `tau` is below tolerance.
fn arnoldi(
    a: &dyn LinearOperator,
    w: &[f64],
    beta: f64,
    tau: f64,
    opts: &KrylovOptions,
) -> Result<Projection, LinalgError> {
    let max_dim = opts.max_dim.min(w.len()).max(1);
    let mut basis: Vec<Vec<f64>> = vec![w.iter().map(|x| x / beta).collect()];
    let mut hess = DMatrix::<f64>::zeros(max_dim + 1, max_dim);
    let anorm_scale = 1.0 + tau.abs();
    for j in 0..max_dim {
        let mut p = a.apply(&basis[j])?;
        for _pass in 0..2 {
            for (i, q) in basis.iter().enumerate() {
                let h = dot(q, &p);
                hess[(i, j)] += h;
                p.iter_mut().zip(q).for_each(|(pv, qv)| *pv -= h * qv);
            }
        }
        let h_next = norm2(&p);
        hess[(j + 1, j)] = h_next;
        let dim = j + 1;
        let col_norm: f64 = (0..=j).map(|i| hess[(i, j)].abs()).sum::<f64>() + h_next;
        if h_next <= 1e-14 * col_norm.max(1e-300) * anorm_scale {
            return Ok(Projection {
                hess: hess.view((0, 0), (dim, dim)).into_owned(),
                basis,
                dim,
                next_norm: 0.0,
                happy: true,
            });
        }
        let done = dim == max_dim;
        if !done && dim >= 2 {
            let probe = Projection {
                hess: hess.view((0, 0), (dim, dim)).into_owned(),
                basis: Vec::new(),
                dim,
                next_norm: h_next,
                happy: false,
            };
            let (_, err) = evaluate(&probe, tau)?;
            if err <= opts.tol * 1e-2 {
                basis.push(p.into_iter().map(|x| x / h_next).collect());
                return Ok(Projection { basis, ..probe });
            }
        }
        basis.push(p.into_iter().map(|x| x / h_next).collect());
        if done {
            return Ok(Projection {
                hess: hess.view((0, 0), (dim, dim)).into_owned(),
                basis,
                dim,
                next_norm: h_next,
                happy: false,
            });
        }
    }
    unreachable!("loop returns on the last iteration")
}

/// Coefficients `e^{τH} e₁` and the relative error estimate
/// `h_{m+1,m} |τ| |e_mᵀ φ₁(τH) e₁|`.
fn evaluate(proj: &Projection, tau: f64) -> Result<(Vec<f64>, f64), LinalgError> {
    let m = proj.dim;
    let mut aug = DMatrix::<f64>::zeros(m + 1, m + 1);
    aug.view_mut((0, 0), (m, m)).copy_from(&(&proj.hess * tau));
    aug[(0, m)] = 1.0;
    let e = expm_dense(&aug)?;
    let coeffs: Vec<f64> = (0..m).map(|i| e[(i, 0)]).collect();
    let err = proj.next_norm * tau.abs() * e[(m - 1, m)].abs();
    Ok((coeffs, err))
}

fn combine(basis: &[Vec<f64>], coeffs: &[f64], beta: f64, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (q, &c) in basis.iter().zip(coeffs) {
        let s = beta * c;
        out.iter_mut().zip(q).for_each(|(o, qv)| *o += s * qv);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{exp_matrix, BlockMatrix};

    #[test]
    fn zero_generator_returns_input() {
        let a = BlockMatrix::zeros(4, 4);
        let v = [1.0, -2.0, 3.0, 0.5];
        assert_eq!(exp_action(&a, &v, 1.0).unwrap(), v.to_vec());
    }

    #[test]
    fn quarter_rotation_maps_e1_to_e2() {
        let a = BlockMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let w = exp_action(&a, &[1.0, 0.0], std::f64::consts::FRAC_PI_2).unwrap();
        assert!(w[0].abs() < 1e-8 && (w[1] - 1.0).abs() < 1e-8, "{w:?}");
    }

    #[test]
    fn stiff_generator_needs_substeps() {
        let n = 60;
        let mut a = nalgebra::DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = -(i as f64 + 1.0) * 3.0;
            if i + 1 < n {
                a[(i, i + 1)] = 1.0;
            }
        }
        let a = BlockMatrix::dense(a);
        let v: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let reference = exp_matrix(&a, 2.0).unwrap().matvec(&v);
        let w = exp_action(&a, &v, 2.0).unwrap();
        let scale = norm2(&reference).max(1e-300);
        let err = norm2(&w.iter().zip(&reference).map(|(x, y)| x - y).collect::<Vec<_>>());
        assert!(err / scale < 1e-8, "relative error {}", err / scale);
    }

    #[test]
    fn negative_time_inverts() {
        let a = BlockMatrix::from_row_slice(2, 2, &[-0.5, 1.0, 0.0, -1.5]);
        let v = [0.3, -0.7];
        let fwd = exp_action(&a, &v, 0.8).unwrap();
        let back = exp_action(&a, &fwd, -0.8).unwrap();
        assert!((back[0] - v[0]).abs() < 1e-10 && (back[1] - v[1]).abs() < 1e-10);
    }
}
