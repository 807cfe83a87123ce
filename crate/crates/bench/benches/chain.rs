use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use kolmo_core::chain::{simulate_chain, DiscreteSolver, InnovationSampler};
use kolmo_core::rng::stream_rng;
use kolmo_core::{BaseDistribution, ChainConfig, ModelSpec, PhasePoint, QuadratureSpec};

fn innovations(c: &mut Criterion) {
    let mut group = c.benchmark_group("innovation");
    for base in [BaseDistribution::Gaussian, BaseDistribution::ScaledUniformMixture] {
        let sampler = InnovationSampler::new(8, base).unwrap();
        let mut rng = stream_rng(1, 0);
        group.throughput(Throughput::Elements(1));
        group.bench_function(BenchmarkId::from_parameter(base.key()), |b| b.iter(|| sampler.sample(&mut rng)));
    }
    group.finish();
}

fn paths(c: &mut Criterion) {
    let model = ModelSpec::perturbed_default(1);
    let z = PhasePoint::origin(1);
    let mut group = c.benchmark_group("chain_path");
    for steps in [16usize, 64] {
        let cfg = ChainConfig::new(1.0, steps, 4, BaseDistribution::Gaussian, 0).unwrap();
        let mut rng = stream_rng(2, 0);
        group.throughput(Throughput::Elements(steps as u64));
        group.bench_with_input(BenchmarkId::from_parameter(steps), &cfg, |b, cfg| {
            b.iter(|| simulate_chain(&model, cfg, black_box(&z), &mut rng, false).unwrap())
        });
    }
    group.finish();
}

fn discrete(c: &mut Criterion) {
    let model = ModelSpec::perturbed_default(1);
    let z0 = PhasePoint::origin(1);
    let cfg = ChainConfig::new(1.0, 4, 2, BaseDistribution::Gaussian, 0).unwrap();
    let solver = DiscreteSolver::new(&model, &cfg, &z0, &QuadratureSpec::default()).unwrap();
    let target = PhasePoint::scalar(0.2, 0.1);
    let mut group = c.benchmark_group("discrete_parametrix");
    group.sample_size(10);
    group.bench_function("evaluate_n4", |b| b.iter(|| solver.evaluate(black_box(&target)).unwrap()));
    group.finish();
}

criterion_group!(benches, innovations, paths, discrete);
criterion_main!(benches);
