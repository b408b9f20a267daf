//! Sequential versus rayon execution of the Monte-Carlo trials.
//!
//! Built without the `parallel` feature both variants run sequentially.

use corrcov::montecarlo::{self, ExperimentKind, ExperimentSpec};
use corrcov::{exec, verify, CorrelationPattern, Distribution};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use num_complex::Complex64;
use std::hint::black_box;

fn worker_counts() -> Vec<usize> {
    let all = exec::default_workers();
    if all > 1 {
        vec![1, all]
    } else {
        vec![1]
    }
}

fn sample_size(c: &mut Criterion) {
    let mut spec = ExperimentSpec::new(ExperimentKind::SampleSize, 1);
    spec.n_values = vec![5, 10];
    spec.trials = 16;
    let mut group = c.benchmark_group("sample_size");
    group.sample_size(10);
    for w in worker_counts() {
        group.bench_with_input(BenchmarkId::from_parameter(w), &w, |b, &w| {
            b.iter(|| montecarlo::run_sample_size_experiment(black_box(&spec), w).unwrap())
        });
    }
    group.finish();
}

fn convergence(c: &mut Criterion) {
    let mut spec = ExperimentSpec::new(ExperimentKind::Convergence, 1);
    spec.n_values = vec![10];
    spec.m_values = vec![100, 200, 400];
    spec.trials = 16;
    let mut group = c.benchmark_group("convergence");
    group.sample_size(10);
    for w in worker_counts() {
        group.bench_with_input(BenchmarkId::from_parameter(w), &w, |b, &w| {
            b.iter(|| montecarlo::run_convergence_experiment(black_box(&spec), w).unwrap())
        });
    }
    group.finish();
}

fn quadratic_form_tail(c: &mut Criterion) {
    let b = CorrelationPattern::toeplitz(Complex64::new(0.5, 0.0), 50)
        .unwrap()
        .materialize_complex();
    let mut group = c.benchmark_group("quadratic_form_tail");
    group.sample_size(10);
    for w in worker_counts() {
        group.bench_with_input(BenchmarkId::from_parameter(w), &w, |bench, &w| {
            bench.iter(|| {
                verify::check_hanson_wright_empirical(Distribution::Gaussian, &b, false, 20_000, None, 3, w).unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, sample_size, convergence, quadratic_form_tail);
criterion_main!(benches);
