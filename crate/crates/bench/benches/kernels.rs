use ckr_bench::fixture;
use ckr_core::{decoherence, reduced_density, schmidt, Basis, CouplingStorage};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn floquet_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("step");
    for n in [128, 256, 512] {
        for (label, storage) in [("table", CouplingStorage::Table), ("on_the_fly", CouplingStorage::OnTheFly)] {
            let (mut propagator, mut psi) = fixture(n, 0.1, 0, storage).unwrap();
            group.bench_function(BenchmarkId::new(label, n), |b| {
                b.iter(|| propagator.step(&mut psi).unwrap())
            });
        }
    }
    group.finish();
}

fn spectra(c: &mut Criterion) {
    let mut group = c.benchmark_group("entanglement");
    group.sample_size(20);
    for n in [128, 256] {
        let (_, psi) = fixture(n, 0.1, 50, CouplingStorage::Table).unwrap();
        group.bench_function(BenchmarkId::new("schmidt", n), |b| b.iter(|| schmidt(&psi).unwrap()));
        group.bench_function(BenchmarkId::new("decoherence", n), |b| {
            b.iter(|| decoherence(&reduced_density(&psi, Basis::Momentum).unwrap()).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, floquet_step, spectra);
criterion_main!(benches);
