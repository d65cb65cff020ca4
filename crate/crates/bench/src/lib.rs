//! Benchmark fixtures and routines, shared by the `solver` bench target.

use criterion::{BenchmarkId, Criterion, Throughput};
use std::hint::black_box;

use netclust::{
    compute_path, make_two_cluster_dataset, prox_schatten, rbf_weights, AdmmSettings, AdmmSolver,
    FusionWeights, GraphTensor, PathSettings, RbfScale, SchattenOrder,
};

/// The two-cluster graphon design at size `p × p × t`.
pub fn dataset(p: usize, t: usize) -> GraphTensor {
    make_two_cluster_dataset(p, t, 17).unwrap().tensor
}

pub fn prox(c: &mut Criterion) {
    let mut group = c.benchmark_group("prox");
    for p in [10, 25, 50] {
        let x = dataset(p, 2);
        let m = x.slice(0) - x.slice(1);
        for q in SchattenOrder::ALL {
            group.bench_with_input(BenchmarkId::new(q.to_string(), p), &m, |b, m| {
                b.iter(|| prox_schatten(black_box(m), 0.5, q).unwrap())
            });
        }
    }
    group.finish();
}

pub fn admm_iteration(c: &mut Criterion) {
    let mut group = c.benchmark_group("admm_iteration");
    for (p, t) in [(10, 10), (20, 20), (25, 40)] {
        let x = dataset(p, t);
        let w = FusionWeights::uniform(t);
        group.throughput(Throughput::Elements(w.len() as u64));
        for q in [SchattenOrder::Nuclear, SchattenOrder::Frobenius] {
            let solver = AdmmSolver::new(&x, &w, q, AdmmSettings::default()).unwrap();
            group.bench_function(BenchmarkId::new(q.to_string(), format!("p{p}_T{t}")), |b| {
                b.iter_batched_ref(
                    || solver.clone(),
                    |s| s.iterate(black_box(1.0)).unwrap(),
                    criterion::BatchSize::LargeInput,
                )
            });
        }
    }
    group.finish();
}

pub fn path(c: &mut Criterion) {
    let mut group = c.benchmark_group("path");
    group.sample_size(10);
    let x = dataset(25, 20);
    let w = rbf_weights(&x, RbfScale::Auto, 10).unwrap();
    group.bench_function("graphon_p25_T20", |b| {
        b.iter(|| {
            compute_path(
                black_box(&x),
                &w,
                SchattenOrder::Nuclear,
                PathSettings::default(),
            )
            .unwrap()
        })
    });
    group.finish();
}
