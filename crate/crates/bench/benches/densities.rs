use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use kolmo_core::charfn::{invert_density, CharFnTable, InversionSettings};
use kolmo_core::gaussian::{frozen_density, hat_p};
use kolmo_core::parametrix::kernel_h;
use kolmo_core::{BaseDistribution, ModelSpec, ParametrixSolver, PhasePoint, QuadratureSpec, SeriesOptions};

fn gaussian(c: &mut Criterion) {
    let model = ModelSpec::perturbed_default(1);
    let quad = QuadratureSpec::default();
    let (z0, zp) = (PhasePoint::scalar(0.1, -0.2), PhasePoint::scalar(0.4, 0.1));
    c.bench_function("frozen_density", |b| {
        b.iter(|| frozen_density(&model, black_box(0.5), &z0, &zp, &zp, &quad).unwrap())
    });
    c.bench_function("hat_p", |b| b.iter(|| hat_p(1.0, 1, black_box(0.5), &z0, &zp).unwrap()));
    c.bench_function("kernel_h", |b| b.iter(|| kernel_h(&model, black_box(0.5), &z0, &zp).unwrap()));
}

fn series(c: &mut Criterion) {
    let model = ModelSpec::perturbed_default(1);
    let quad = QuadratureSpec::default();
    let z0 = PhasePoint::origin(1);
    let mut group = c.benchmark_group("parametrix");
    group.sample_size(10);
    group.bench_function("solver_setup", |b| {
        b.iter(|| ParametrixSolver::new(&model, 0.25, &z0, &quad, &SeriesOptions::default()).unwrap())
    });
    let solver = ParametrixSolver::new(&model, 0.25, &z0, &quad, &SeriesOptions::default()).unwrap();
    let target = PhasePoint::scalar(0.3, 0.05);
    group.bench_function("evaluate", |b| b.iter(|| solver.evaluate(black_box(&target)).unwrap()));
    group.finish();
}

fn charfn(c: &mut Criterion) {
    let settings = InversionSettings::default();
    let mut group = c.benchmark_group("charfn");
    group.sample_size(10);
    group.bench_function("build_and_invert_mixture_n4", |b| {
        b.iter(|| {
            let table = CharFnTable::build(BaseDistribution::ScaledUniformMixture, 4, &settings).unwrap();
            invert_density(&table, &settings).unwrap()
        })
    });
    group.finish();
}

criterion_group!(benches, gaussian, series, charfn);
criterion_main!(benches);
