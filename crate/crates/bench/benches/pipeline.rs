use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pimsner_lab::correspondence::TensorPowerCache;
use pimsner_lab::dim_calculus::{confluence_check, propagate};
use pimsner_lab::factorization::{moremaps_check, tower_roots, verify_factorization};
use pimsner_lab::fock::{basis_spanning_family, quasicentral_check};
use pimsner_lab::tasks::relation_suite;
use pimsner_lab_bench::{classifiable_graph, cyclic_fixture, generator, twisted_free};

fn tensor_powers(c: &mut Criterion) {
    let h = twisted_free();
    let mut g = c.benchmark_group("tensor_powers");
    for k in [4, 6, 8] {
        g.bench_with_input(BenchmarkId::from_parameter(k), &k, |b, &k| {
            b.iter(|| TensorPowerCache::new(h.clone(), k).unwrap())
        });
    }
    g.finish();
}

fn factorization(c: &mut Criterion) {
    let mut g = c.benchmark_group("verify_factorization");
    g.sample_size(10);
    for p in [9, 17, 33] {
        let (h, t) = cyclic_fixture(p, p);
        let f = generator(&h);
        g.bench_with_input(BenchmarkId::from_parameter(p), &p, |b, &p| {
            b.iter(|| verify_factorization(&h, &t, black_box(&f), 0.7, 2 * p + 6).unwrap())
        });
    }
    g.finish();
}

fn row_operator(c: &mut Criterion) {
    let mut g = c.benchmark_group("moremaps");
    g.sample_size(10);
    for p in [3, 5, 9] {
        let (h, t) = cyclic_fixture(p, p);
        let cache = Arc::new(TensorPowerCache::new(h, p + 2).unwrap());
        let roots = tower_roots(&t, 0).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(p), &p, |b, &p| {
            b.iter(|| moremaps_check(&cache, black_box(&roots), p + 2, None).unwrap())
        });
    }
    g.finish();
}

fn quasicentral(c: &mut Criterion) {
    let cache = Arc::new(TensorPowerCache::new(twisted_free(), 4).unwrap());
    let family = basis_spanning_family(&cache, 4, usize::MAX).unwrap();
    c.bench_function("quasicentral_p4", |b| {
        b.iter(|| quasicentral_check(&cache, 4, Some(2), black_box(&family)).unwrap())
    });
}

fn relations(c: &mut Criterion) {
    let mut g = c.benchmark_group("relations");
    g.sample_size(10);
    g.bench_function("suite_20", |b| b.iter(|| relation_suite(black_box(0), 20, 1e-10).unwrap()));
    g.finish();
}

fn dim_calculus(c: &mut Criterion) {
    let graph = classifiable_graph();
    c.bench_function("propagate_classifiable", |b| b.iter(|| propagate(black_box(&graph)).unwrap()));
    let seeds: Vec<u64> = (0..20).collect();
    c.bench_function("confluence_20", |b| b.iter(|| confluence_check(black_box(&graph), &seeds).unwrap()));
}

criterion_group!(benches, tensor_powers, factorization, row_operator, quasicentral, relations, dim_calculus);
criterion_main!(benches);
