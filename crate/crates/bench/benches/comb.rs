use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qcomb::protocols::StreamlinedVariant;
use qcomb::PerformanceOperator;
use qcomb_bench::{generic, streamlined, Fixture};

fn fixtures() -> Vec<Fixture> {
    vec![
        streamlined(StreamlinedVariant::FourCall),
        streamlined(StreamlinedVariant::FiveCall),
        generic(4, 3, 12),
    ]
}

fn purification(c: &mut Criterion) {
    let mut group = c.benchmark_group("purification");
    for f in fixtures() {
        let compiled = f.comb.compile().unwrap();
        group.bench_function(BenchmarkId::from_parameter(&f.name), |b| {
            b.iter(|| compiled.purification(black_box(&f.params)).unwrap())
        });
    }
    group.finish();
}

fn loss(c: &mut Criterion) {
    let mut group = c.benchmark_group("loss");
    for f in fixtures() {
        let compiled = f.comb.compile().unwrap();
        group.bench_function(BenchmarkId::from_parameter(&f.name), |b| {
            b.iter(|| compiled.score(black_box(&f.params), &f.omega).unwrap())
        });
    }
    group.finish();
}

fn gradient(c: &mut Criterion) {
    let mut group = c.benchmark_group("adjoint_gradient");
    group.sample_size(20);
    for f in fixtures() {
        let compiled = f.comb.compile().unwrap();
        group.bench_function(BenchmarkId::from_parameter(&f.name), |b| {
            b.iter(|| compiled.score_gradient(black_box(&f.params), &f.omega).unwrap())
        });
    }
    group.finish();
}

fn omega(c: &mut Criterion) {
    let mut group = c.benchmark_group("build_omega");
    group.sample_size(10);
    for m in [2, 4] {
        group.bench_function(BenchmarkId::from_parameter(m), |b| {
            b.iter(|| PerformanceOperator::sample(m, 1000, black_box(11)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, purification, loss, gradient, omega);
criterion_main!(benches);
