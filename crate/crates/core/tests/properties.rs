mod common;

use std::sync::Arc;

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use reachdec::approx::{compose, decompose, epsilon_close, project_block, ApproxScheme, BlockStructure};
use reachdec::discretize::{DiscreteSystem, StepInputs};
use reachdec::linalg::{expm_dense, BlockMatrix, CsrMatrix, DenseOperator};
use reachdec::oracle::{hausdorff_estimate, reach_nondecomposed, sample_directions};
use reachdec::reach::{
    check_property, reach, Atom, CheckOptions, Comparison, Formula, PowerStrategy, ReachOptions,
    SafetyProperty, Verdict,
};
use reachdec::sets::{Ball, HPolygon, LazySet, Norm};

use common::*;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn tol(rho: f64) -> f64 {
    1e-9 * (1.0 + rho.abs())
}

/// Random concrete set of dimension `n`: a box, a ball, or (in 2D) a polygon.
fn random_leaf(rng: &mut ChaCha8Rng, n: usize) -> Arc<LazySet> {
    match rng.gen_range(0..3) {
        0 => random_box(rng, n, 2.0, 1.0),
        1 => {
            let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let norm = [Norm::One, Norm::Two, Norm::Inf][rng.gen_range(0..3)];
            Arc::new(Ball::new(c, rng.gen_range(0.1..1.5), norm).unwrap().into())
        }
        _ if n == 2 => {
            let m = rng.gen_range(3..12);
            Arc::new(HPolygon::new(random_polygon_lines(rng, m)).unwrap().into())
        }
        _ => random_box(rng, n, 2.0, 1.0),
    }
}

/// Random tree of lazy operations of the given depth.
fn random_tree(rng: &mut ChaCha8Rng, n: usize, depth: usize) -> Arc<LazySet> {
    if depth == 0 {
        return random_leaf(rng, n);
    }
    match rng.gen_range(0..5) {
        0 => {
            let m = random_matrix(rng, n, n, 1.0);
            LazySet::linear_map(Arc::new(DenseOperator(m)), random_tree(rng, n, depth - 1)).unwrap()
        }
        1 => LazySet::minkowski_sum(random_tree(rng, n, depth - 1), random_tree(rng, n, depth - 1)).unwrap(),
        2 => LazySet::convex_hull(random_tree(rng, n, depth - 1), random_tree(rng, n, depth - 1)).unwrap(),
        3 => {
            let parts = (0..3).map(|_| random_tree(rng, n, depth - 1)).collect();
            LazySet::minkowski_sum_array(parts).unwrap()
        }
        _ if n >= 2 => {
            let k = rng.gen_range(1..n);
            LazySet::cartesian_product(vec![random_tree(rng, k, depth - 1), random_tree(rng, n - k, depth - 1)])
                .unwrap()
        }
        _ => random_tree(rng, n, depth - 1),
    }
}

fn random_direction(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let d: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if d.iter().any(|v| v.abs() > 1e-3) {
            return d;
        }
    }
}

/// Random linear image of a box, which is rarely a Cartesian product.
fn skewed_set(rng: &mut ChaCha8Rng, n: usize) -> Arc<LazySet> {
    let m = random_matrix(rng, n, n, 1.0);
    LazySet::linear_map(Arc::new(DenseOperator(m)), random_box(rng, n, 1.0, 1.0)).unwrap()
}

fn small_system(rng: &mut ChaCha8Rng, n: usize) -> DiscreteSystem {
    let target = rng.gen_range(0.5..0.98);
    let phi = stable_matrix(rng, n, target);
    random_recurrence(rng, n, phi)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn support_vector_attains_support_function(seed in any::<u64>(), n in 1usize..5, depth in 0usize..4) {
        let mut r = rng(seed);
        let set = random_tree(&mut r, n, depth);
        for _ in 0..8 {
            let d = random_direction(&mut r, n);
            let rho = set.support_function(&d).unwrap();
            let v = set.support_vector(&d).unwrap();
            prop_assert!((dot(&d, &v) - rho).abs() <= tol(rho), "ℓᵀσ = {} vs ρ = {}", dot(&d, &v), rho);
        }
    }

    #[test]
    fn symmetric_interval_hull_contains_the_set(seed in any::<u64>(), n in 1usize..5, depth in 0usize..3) {
        let mut r = rng(seed);
        let set = random_tree(&mut r, n, depth);
        let hull: LazySet = set.symmetric_interval_hull().unwrap().into();
        for d in sample_directions(n, 64, Norm::Two, seed) {
            let inner = set.support_function(&d).unwrap();
            let outer = hull.support_function(&d).unwrap();
            prop_assert!(inner <= outer + tol(outer));
        }
    }

    #[test]
    fn decomposition_contains_the_set(seed in any::<u64>(), n in 2usize..7, eps in prop::option::of(0.01f64..0.5)) {
        let mut r = rng(seed);
        let set = skewed_set(&mut r, n);
        let scheme = eps.map_or(ApproxScheme::BoxDirections, ApproxScheme::EpsilonClose);
        let bs = BlockStructure::new(n);
        let product = compose(&decompose(&set, &bs, scheme).unwrap()).unwrap();
        for d in sample_directions(n, 1000, Norm::Two, seed) {
            let inner = set.support_function(&d).unwrap();
            let outer = product.support_function(&d).unwrap();
            prop_assert!(inner <= outer + tol(outer), "direction {:?}: {} > {}", d, inner, outer);
        }
    }

    #[test]
    fn box_decomposition_distributes_over_sums(seed in any::<u64>(), n in 1usize..8) {
        let mut r = rng(seed);
        let a = skewed_set(&mut r, n);
        let b = skewed_set(&mut r, n);
        let bs = BlockStructure::new(n);
        let scheme = ApproxScheme::BoxDirections;
        let whole = decompose(&LazySet::minkowski_sum(a.clone(), b.clone()).unwrap(), &bs, scheme).unwrap();
        let left = decompose(&a, &bs, scheme).unwrap();
        let right = decompose(&b, &bs, scheme).unwrap();
        for i in 0..bs.count() {
            let (LazySet::Hyperrectangle(w), LazySet::Hyperrectangle(x), LazySet::Hyperrectangle(y)) =
                (whole[i].as_ref(), left[i].as_ref(), right[i].as_ref())
            else {
                panic!("box scheme produced a non-box block");
            };
            for j in 0..w.dim() {
                let c = x.center()[j] + y.center()[j];
                let rad = x.radius()[j] + y.radius()[j];
                prop_assert!((w.center()[j] - c).abs() <= 1e-12 * (1.0 + c.abs()));
                prop_assert!((w.radius()[j] - rad).abs() <= 1e-12 * (1.0 + rad.abs()));
            }
        }
    }

    #[test]
    fn epsilon_close_polygon_is_within_tolerance(seed in any::<u64>(), eps in 1e-3f64..0.3) {
        let mut r = rng(seed);
        let set = random_tree(&mut r, 2, 2);
        let poly: LazySet = epsilon_close(&set, eps).unwrap().into();
        let dirs = sample_directions(2, 4096, Norm::Two, seed);
        let d = hausdorff_estimate(&set, &poly, Norm::Two, &dirs).unwrap();
        prop_assert!(d <= eps + 1e-9, "distance {} above ε = {}", d, eps);
    }

    #[test]
    fn block_projection_matches_coordinates(seed in any::<u64>(), n in 1usize..8) {
        let mut r = rng(seed);
        let set = skewed_set(&mut r, n);
        let bs = BlockStructure::new(n);
        for i in 0..bs.count() {
            let range = bs.range(i);
            let proj = project_block(&set, &bs, i).unwrap();
            let d = random_direction(&mut r, range.len());
            let mut lifted = vec![0.0; n];
            lifted[range].copy_from_slice(&d);
            let a = proj.support_function(&d).unwrap();
            let b = set.support_function(&lifted).unwrap();
            prop_assert!((a - b).abs() <= tol(b));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn exponential_semigroup(seed in any::<u64>(), n in 1usize..7, s in 0.01f64..1.0, t in 0.01f64..1.0) {
        let mut r = rng(seed);
        let a = random_matrix(&mut r, n, n, 1.0);
        let whole = expm_dense(&(&a * (s + t))).unwrap();
        let split = expm_dense(&(&a * s)).unwrap() * expm_dense(&(&a * t)).unwrap();
        let scale = whole.amax().max(1.0);
        prop_assert!(max_abs_diff(&whole, &split) <= 1e-9 * scale);
    }

    #[test]
    fn sparse_and_dense_storage_agree(seed in any::<u64>(), n in 1usize..12, density in 0.05f64..0.6) {
        let mut r = rng(seed);
        let m = DMatrix::from_fn(n, n, |_, _| if r.gen_bool(density) { r.gen_range(-1.0..1.0) } else { 0.0 });
        let o = DMatrix::from_fn(n, n, |_, _| if r.gen_bool(density) { r.gen_range(-1.0..1.0) } else { 0.0 });
        let dense = BlockMatrix::dense(m.clone());
        let sparse = BlockMatrix::sparse(CsrMatrix::from_dense(&m));
        let x: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
        for (a, b) in dense.matvec(&x).iter().zip(sparse.matvec(&x)) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        for (a, b) in dense.matvec_transpose(&x).iter().zip(sparse.matvec_transpose(&x)) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        let pd = dense.matmul(&BlockMatrix::dense(o.clone())).unwrap().to_dense();
        let ps = sparse.matmul(&BlockMatrix::sparse(CsrMatrix::from_dense(&o))).unwrap().to_dense();
        prop_assert!(max_abs_diff(&pd, &ps) <= 1e-12);
        prop_assert!(max_abs_diff(&pd, &(&m * &o)) <= 1e-12);
    }

    #[test]
    fn blocks_reconstruct_the_matrix(seed in any::<u64>(), rows in 1usize..9, cols in 1usize..9, sparse in any::<bool>()) {
        let mut r = rng(seed);
        let m = DMatrix::from_fn(rows, cols, |_, _| if r.gen_bool(0.3) { r.gen_range(-1.0..1.0) } else { 0.0 });
        let bm = if sparse { BlockMatrix::sparse(CsrMatrix::from_dense(&m)) } else { BlockMatrix::dense(m.clone()) };
        let mut rebuilt = DMatrix::zeros(rows, cols);
        for i in 0..bm.row_block_count() {
            for j in 0..bm.col_block_count() {
                let b = bm.block(i, j);
                for p in 0..b.rows() {
                    for q in 0..b.cols() {
                        rebuilt[(2 * i + p, 2 * j + q)] = b.get(p, q);
                    }
                }
                let listed = bm.nonzero_blocks(i).contains(&j);
                prop_assert_eq!(listed, !b.is_zero(), "block ({}, {})", i, j);
            }
        }
        prop_assert_eq!(rebuilt, m);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn decomposed_tube_contains_exact_reach_set(seed in any::<u64>(), n in 2usize..7) {
        let mut r = rng(seed);
        let sys = small_system(&mut r, n);
        let steps = 12;
        let tube = reach(&sys, &ReachOptions::new(steps)).unwrap();
        let dirs = sample_directions(n, 200, Norm::Two, seed);
        let exact = reach_nondecomposed(&sys, steps, &dirs).unwrap();
        for (k, row) in exact.iter().enumerate() {
            for (d, o) in dirs.iter().zip(row) {
                let s = tube.support(k, d).unwrap();
                prop_assert!(*o <= s + tol(s), "step {}: exact {} > decomposed {}", k, o, s);
            }
        }
    }

    #[test]
    fn sparse_and_dense_tubes_agree(seed in any::<u64>(), n in 2usize..9) {
        let mut r = rng(seed);
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = r.gen_range(-0.9..0.9);
            let j = r.gen_range(0..n);
            m[(i, j)] += r.gen_range(-0.3..0.3);
        }
        let x0 = random_box(&mut r, n, 1.0, 0.5);
        let v = random_box(&mut r, n, 0.1, 0.05);
        let dense = DiscreteSystem::from_recurrence(BlockMatrix::dense(m.clone()), x0.clone(), StepInputs::Constant(v.clone())).unwrap();
        let sparse = DiscreteSystem::from_recurrence(BlockMatrix::sparse(CsrMatrix::from_dense(&m)), x0, StepInputs::Constant(v)).unwrap();
        for strategy in [PowerStrategy::FullPowers, PowerStrategy::RowBlocks] {
            let opts = ReachOptions::new(15).with_strategy(strategy);
            let a = reach(&dense, &opts).unwrap();
            let b = reach(&sparse, &opts).unwrap();
            for k in 0..a.len() {
                for (x, y) in a.sets[k].iter().zip(&b.sets[k]) {
                    let (hx, hy) = (x.interval_hull().unwrap(), y.interval_hull().unwrap());
                    for (p, q) in hx.low().iter().chain(&hx.high()).zip(hy.low().iter().chain(&hy.high())) {
                        prop_assert!((p - q).abs() <= 1e-12 * (1.0 + p.abs()), "step {}: {} vs {}", k, p, q);
                    }
                }
            }
        }
    }

    #[test]
    fn verified_properties_hold_on_exact_sets(seed in any::<u64>(), n in 2usize..6, slack in 0.0f64..2.0) {
        let mut r = rng(seed);
        let sys = small_system(&mut r, n);
        let steps = 10;
        let atoms: Vec<Atom> = (0..3)
            .map(|_| {
                let c = random_direction(&mut r, n);
                let cmp = if r.gen_bool(0.5) { Comparison::Le } else { Comparison::Lt };
                Atom::new(c, cmp, 0.0)
            })
            .collect();
        let dirs: Vec<Vec<f64>> = atoms.iter().map(|a| a.coeffs.clone()).collect();
        let exact = reach_nondecomposed(&sys, steps, &dirs).unwrap();
        // Place each bound a random distance above the exact maximum, so some
        // properties hold but are too tight for the decomposed tube.
        let atoms: Vec<Atom> = atoms
            .into_iter()
            .enumerate()
            .map(|(i, a)| {
                let top = exact.iter().map(|row| row[i]).fold(f64::NEG_INFINITY, f64::max);
                Atom::new(a.coeffs, a.cmp, top + slack * r.gen_range(0.0..1.0))
            })
            .collect();
        let prop = SafetyProperty::on_states(Formula::And(atoms.iter().cloned().map(Formula::Atom).collect()));
        let verdict = check_property(&sys, &prop, &CheckOptions::new(steps)).unwrap();
        if let Verdict::Verified { .. } = verdict {
            for row in &exact {
                for (a, rho) in atoms.iter().zip(row) {
                    let ok = match a.cmp {
                        Comparison::Le => *rho <= a.bound,
                        _ => *rho < a.bound,
                    };
                    prop_assert!(ok, "verified, but ρ = {} against {}", rho, a.bound);
                }
            }
        }
    }

    #[test]
    fn block_permutation_is_exact(seed in any::<u64>(), blocks in 2usize..5) {
        let mut r = rng(seed);
        let n = 2 * blocks;
        let mut perm: Vec<usize> = (0..blocks).collect();
        for i in (1..blocks).rev() {
            perm.swap(i, r.gen_range(0..=i));
        }
        let mut m = DMatrix::zeros(n, n);
        for (i, &j) in perm.iter().enumerate() {
            let b = random_matrix(&mut r, 2, 2, 1.0);
            let b = &b * (0.9 / inf_norm(&b).max(1e-12));
            m.view_mut((2 * i, 2 * j), (2, 2)).copy_from(&b);
        }
        let sys = random_recurrence(&mut r, n, BlockMatrix::dense(m));
        let steps = 8;
        let tube = reach(&sys, &ReachOptions::new(steps).lazy()).unwrap();
        let dirs = sample_directions(n, 200, Norm::One, seed);
        let exact = reach_nondecomposed(&sys, steps, &dirs).unwrap();
        for (k, row) in exact.iter().enumerate() {
            for (d, o) in dirs.iter().zip(row) {
                let s = tube.support(k, d).unwrap();
                prop_assert!((s - o).abs() <= 1e-9 * (1.0 + o.abs()), "step {}: {} vs {}", k, s, o);
            }
        }
    }
}
