#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use reachdec::discretize::{DiscreteSystem, StepInputs};
use reachdec::linalg::{BlockMatrix, CsrMatrix};
use reachdec::sets::{HalfPlane, Hyperrectangle, LazySet};

pub fn boxed(center: &[f64], radius: &[f64]) -> Arc<LazySet> {
    Arc::new(Hyperrectangle::new(center.to_vec(), radius.to_vec()).unwrap().into())
}

pub fn random_box(rng: &mut impl Rng, n: usize, spread: f64, max_radius: f64) -> Arc<LazySet> {
    let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-spread..=spread)).collect();
    let r: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..=max_radius)).collect();
    boxed(&c, &r)
}

/// Uniform point of a box, or one of its vertices when `vertex` is set.
pub fn point_in(rng: &mut impl Rng, set: &LazySet, vertex: bool) -> Vec<f64> {
    let LazySet::Hyperrectangle(h) = set else {
        panic!("expected a box");
    };
    h.center()
        .iter()
        .zip(h.radius())
        .map(|(c, r)| {
            let s: f64 = if vertex {
                if rng.gen_bool(0.5) { 1.0 } else { -1.0 }
            } else {
                rng.gen_range(-1.0..=1.0)
            };
            c + s * r
        })
        .collect()
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-scale..=scale))
}

pub fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Dense random `Φ` rescaled to `‖Φ‖_∞ = target`.
pub fn stable_matrix(rng: &mut impl Rng, n: usize, target: f64) -> BlockMatrix {
    let m = random_matrix(rng, n, n, 1.0);
    let s = target / inf_norm(&m);
    BlockMatrix::dense(m * s)
}

/// Block-diagonal `Φ` of random 2×2 blocks, each with `‖·‖_∞ ≤ target`.
pub fn block_diagonal(rng: &mut impl Rng, n: usize, target: f64) -> BlockMatrix {
    let mut m = DMatrix::zeros(n, n);
    let mut i = 0;
    while i < n {
        let k = (n - i).min(2);
        let b = random_matrix(rng, k, k, 1.0);
        let s = target * rng.gen_range(0.5..=1.0) / inf_norm(&b).max(1e-12);
        m.view_mut((i, i), (k, k)).copy_from(&(b * s));
        i += k;
    }
    BlockMatrix::dense(m)
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Sparse `n × n` matrix with `per_row` random off-diagonal entries per row and a
/// negative diagonal.
pub fn random_sparse(rng: &mut impl Rng, n: usize, per_row: usize, scale: f64) -> BlockMatrix {
    let mut t = Vec::with_capacity(n * (per_row + 1));
    for i in 0..n {
        t.push((i, i, -rng.gen_range(0.0..=scale)));
        for _ in 0..per_row {
            t.push((i, rng.gen_range(0..n), rng.gen_range(-scale..=scale)));
        }
    }
    BlockMatrix::sparse(CsrMatrix::from_triplets(n, n, &t).unwrap())
}

/// `Σ_{i<terms} δ^{i+shift} / (i+shift)! Aⁱ` with Kahan-compensated entries.
pub fn series(a: &DMatrix<f64>, delta: f64, shift: usize, terms: usize) -> DMatrix<f64> {
    let n = a.nrows();
    let mut sum = DMatrix::<f64>::zeros(n, n);
    let mut comp = DMatrix::<f64>::zeros(n, n);
    let mut power = DMatrix::<f64>::identity(n, n);
    let mut coeff = delta.powi(shift as i32) / (1..=shift).map(|k| k as f64).product::<f64>();
    for i in 0..terms {
        let term = &power * coeff;
        for (idx, t) in term.iter().enumerate() {
            let y = t - comp[idx];
            let s = sum[idx] + y;
            comp[idx] = (s - sum[idx]) - y;
            sum[idx] = s;
        }
        power = &power * a;
        coeff *= delta / (i + shift + 1) as f64;
    }
    sum
}

/// Tangent lines of a perturbed circle at sorted random angles, regenerated
/// until every angular gap is below π.
pub fn random_polygon_lines(rng: &mut impl Rng, m: usize) -> Vec<HalfPlane> {
    loop {
        let mut angles: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
        angles.sort_by(f64::total_cmp);
        let mut gap = angles[0] + std::f64::consts::TAU - angles[m - 1];
        for w in angles.windows(2) {
            gap = gap.max(w[1] - w[0]);
        }
        if gap >= 0.95 * std::f64::consts::PI {
            continue;
        }
        let (cx, cy) = (rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
        return angles
            .iter()
            .map(|t| {
                let n = [t.cos(), t.sin()];
                let r = rng.gen_range(0.5..2.0);
                HalfPlane::new(n, r + n[0] * cx + n[1] * cy).unwrap()
            })
            .collect();
    }
}

/// `Φ` with a random box initial set and a small constant input box.
pub fn random_recurrence(rng: &mut impl Rng, n: usize, phi: BlockMatrix) -> DiscreteSystem {
    let x0 = random_box(rng, n, 1.0, 0.5);
    let v = random_box(rng, n, 0.1, 0.05);
    DiscreteSystem::from_recurrence(phi, x0, StepInputs::Constant(v)).unwrap()
}
