use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use mmtier::analytics::{intensity_from_r0, QuadratureSpec};
use mmtier::channel::{BeamParams, ChannelParams, LinkState};
use mmtier::montecarlo::{empirical_coverage_grid, empirical_laplace, SimConfig};
use mmtier::par::Execution;

fn setup(trials: u64) -> (f64, ChannelParams, BeamParams, SimConfig) {
    let lambda0 = intensity_from_r0(100.0);
    let quad = QuadratureSpec::for_intensity(lambda0);
    let sim = SimConfig::matching(&quad, trials, 7).unwrap();
    let beam = BeamParams::from_degrees(30.0, 100.0, 1.0, 12).unwrap();
    (lambda0, ChannelParams::default(), beam, sim)
}

fn coverage_grid(c: &mut Criterion) {
    let (lambda0, channel, beam, sim) = setup(2_000);
    let taus = [0.1, 1.0, 10.0, 100.0];
    let gains = [1, 6, 12];
    let mut group = c.benchmark_group("coverage_grid");
    group.sample_size(10);
    for execution in [Execution::Sequential, Execution::Parallel] {
        let sim = sim.with_execution(execution);
        group.bench_with_input(BenchmarkId::from_parameter(format!("{execution:?}")), &sim, |b, sim| {
            b.iter(|| empirical_coverage_grid(&taus, &gains, lambda0, &channel, &beam, sim).unwrap())
        });
    }
    group.finish();
}

fn laplace(c: &mut Criterion) {
    let (lambda0, channel, beam, sim) = setup(10_000);
    let mut group = c.benchmark_group("laplace");
    group.sample_size(10);
    for execution in [Execution::Sequential, Execution::Parallel] {
        let sim = sim.with_execution(execution);
        group.bench_with_input(BenchmarkId::from_parameter(format!("{execution:?}")), &sim, |b, sim| {
            b.iter(|| empirical_laplace(1e4, 60.0, LinkState::Los, 6, lambda0, &channel, &beam, sim).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, coverage_grid, laplace);
criterion_main!(benches);
