//! Reach-tube computation on a rayon pool versus a single-thread pool.
//!
//! Building without the `parallel` feature makes both variants sequential.

use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::ThreadPoolBuilder;

use reachdec::approx::{decompose, ApproxScheme, BlockStructure};
use reachdec::discretize::{DiscreteSystem, StepInputs};
use reachdec::linalg::{BlockMatrix, DenseOperator};
use reachdec::oracle::{reach_nondecomposed, sample_directions};
use reachdec::reach::{reach, PowerStrategy, ReachOptions};
use reachdec::sets::{Hyperrectangle, LazySet, Norm};

fn random_box(rng: &mut ChaCha8Rng, n: usize) -> Arc<LazySet> {
    let c = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let r = (0..n).map(|_| rng.gen_range(0.0..0.1)).collect();
    Arc::new(Hyperrectangle::new(c, r).unwrap().into())
}

fn system(n: usize, seed: u64) -> DiscreteSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0f64..1.0));
    let norm = m.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let phi = BlockMatrix::dense(m * (0.95 / norm));
    let x0 = random_box(&mut rng, n);
    let v = random_box(&mut rng, n);
    DiscreteSystem::from_recurrence(phi, x0, StepInputs::Constant(v)).unwrap()
}

fn pools() -> Vec<(String, rayon::ThreadPool)> {
    let threads = rayon::current_num_threads();
    vec![
        ("1-thread".to_string(), ThreadPoolBuilder::new().num_threads(1).build().unwrap()),
        (
            format!("rayon-{threads}"),
            ThreadPoolBuilder::new().num_threads(threads).build().unwrap(),
        ),
    ]
}

fn bench_reach(c: &mut Criterion) {
    let mut group = c.benchmark_group("reach");
    group.sample_size(10);
    for n in [32, 96] {
        let sys = system(n, n as u64);
        for strategy in [PowerStrategy::FullPowers, PowerStrategy::RowBlocks] {
            let opts = ReachOptions::new(50).with_strategy(strategy);
            for (name, pool) in pools() {
                let id = BenchmarkId::new(format!("{strategy:?}/{name}"), n);
                group.bench_with_input(id, &n, |b, _| b.iter(|| pool.install(|| reach(&sys, &opts).unwrap())));
            }
        }
    }
    group.finish();
}

fn bench_decompose(c: &mut Criterion) {
    let mut group = c.benchmark_group("decompose");
    group.sample_size(10);
    let n = 200;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let set = LazySet::linear_map(Arc::new(DenseOperator(m)), random_box(&mut rng, n)).unwrap();
    let bs = BlockStructure::new(n);
    for scheme in [ApproxScheme::BoxDirections, ApproxScheme::EpsilonClose(0.05)] {
        for (name, pool) in pools() {
            let id = BenchmarkId::new(format!("{scheme}/{name}"), n);
            group.bench_with_input(id, &n, |b, _| b.iter(|| pool.install(|| decompose(&set, &bs, scheme).unwrap())));
        }
    }
    group.finish();
}

fn bench_oracle(c: &mut Criterion) {
    let mut group = c.benchmark_group("oracle");
    group.sample_size(10);
    let n = 32;
    let sys = system(n, 7);
    let dirs = sample_directions(n, 200, Norm::Two, 0);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::new(name, n), |b| {
            b.iter(|| pool.install(|| reach_nondecomposed(&sys, 20, &dirs).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_reach, bench_decompose, bench_oracle);
criterion_main!(benches);
