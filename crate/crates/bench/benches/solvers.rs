use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use mfeit_bench::{ellipse_solver, shape_problem};
use mfeit_core::forward::{coordinate_currents, ForwardSolver};
use mfeit_core::pipeline::{generate_synthetic, ExperimentConfig};
use mfeit_core::separation::{run_separation, SeparationSettings};
use mfeit_core::shape::shape_gradient;
use mfeit_core::spectrum::estimate_spectrum;
use num_complex::Complex64;

fn forward(c: &mut Criterion) {
    let mut g = c.benchmark_group("forward");
    g.sample_size(20);
    for n in [64, 128, 256] {
        let solver = ellipse_solver(n);
        let [f1, _] = coordinate_currents(solver.domain());
        g.bench_with_input(BenchmarkId::new("setup", n), &n, |b, &n| b.iter(|| black_box(ellipse_solver(n))));
        g.bench_with_input(BenchmarkId::new("perfect_conductor", n), &f1, |b, f| {
            b.iter(|| solver.solve_perfect_conductor(black_box(f)).unwrap())
        });
        // a fresh solver each time, so no factorization is reused
        g.bench_with_input(BenchmarkId::new("transmission", n), &f1, |b, f| {
            b.iter_batched(
                || ForwardSolver::from_curves(solver.domain(), solver.anomaly()).unwrap(),
                |s| s.solve_transmission(Complex64::new(2.0, 1.0), 1.0, f).unwrap(),
                criterion::BatchSize::LargeInput,
            )
        });
    }
    g.finish();
}

fn spectrum(c: &mut Criterion) {
    let solver = ellipse_solver(128);
    let mut g = c.benchmark_group("spectrum");
    g.sample_size(10);
    g.bench_function("12_modes_128", |b| b.iter(|| estimate_spectrum(&solver, 12).unwrap()));
    g.finish();
}

fn stages(c: &mut Criterion) {
    let mut g = c.benchmark_group("stages");
    g.sample_size(10);
    let data = generate_synthetic(&ExperimentConfig::default()).unwrap().dataset;
    g.bench_function("separation_default", |b| {
        b.iter(|| run_separation(&data, &SeparationSettings::default()).unwrap())
    });
    let (cauchy, initial) = shape_problem(128, 15);
    g.bench_function("shape_gradient_n15", |b| b.iter(|| shape_gradient(&initial, &cauchy, 128).unwrap()));
    g.finish();
}

criterion_group!(benches, forward, spectrum, stages);
criterion_main!(benches);
