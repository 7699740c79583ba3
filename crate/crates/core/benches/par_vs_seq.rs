use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use landau_speclab::basis::LandauConfig;
use landau_speclab::birman_schwinger::{characteristic_values, BsSystem, ScanGrid};
use landau_speclab::par;
use landau_speclab::profile::{AngularProfile, PotentialSpec, Profile};
use landau_speclab::spectrum::{build_hamiltonian, discrete_spectrum};
use landau_speclab::toeplitz::toeplitz_eigs_radial;

fn power() -> Profile {
    Profile::PowerDecay {
        u0: AngularProfile::Constant(5.0),
        m: 4.0,
    }
}

fn bench_hamiltonian(c: &mut Criterion) {
    let cfg = LandauConfig::new(1.0, 3, 40).unwrap();
    let pot = PotentialSpec::new(0.7, -1, power());
    let mut g = c.benchmark_group("build_hamiltonian");
    g.sample_size(10);
    g.bench_function(BenchmarkId::new("parallel", 40), |b| b.iter(|| build_hamiltonian(&cfg, &pot).unwrap()));
    g.bench_function(BenchmarkId::new("sequential", 40), |b| {
        b.iter(|| par::sequential(|| build_hamiltonian(&cfg, &pot).unwrap()))
    });
    g.finish();
}

fn bench_spectrum(c: &mut Criterion) {
    let cfg = LandauConfig::new(1.0, 3, 40).unwrap();
    let h = build_hamiltonian(&cfg, &PotentialSpec::new(0.7, -1, power())).unwrap();
    let mut g = c.benchmark_group("discrete_spectrum");
    g.sample_size(10);
    g.bench_function("parallel", |b| b.iter(|| discrete_spectrum(&h, 1, 1e-10).unwrap()));
    g.bench_function("sequential", |b| {
        b.iter(|| par::sequential(|| discrete_spectrum(&h, 1, 1e-10).unwrap()))
    });
    g.finish();
}

fn bench_toeplitz(c: &mut Criterion) {
    let cfg = LandauConfig::new(1.0, 2, 400).unwrap();
    let u = power();
    let mut g = c.benchmark_group("toeplitz_eigs_radial");
    g.sample_size(10);
    g.bench_function("parallel", |b| b.iter(|| toeplitz_eigs_radial(1, &u, &cfg).unwrap()));
    g.bench_function("sequential", |b| {
        b.iter(|| par::sequential(|| toeplitz_eigs_radial(1, &u, &cfg).unwrap()))
    });
    g.finish();
}

fn bench_charvals(c: &mut Criterion) {
    let cfg = LandauConfig::new(1.0, 2, 20).unwrap();
    let h = build_hamiltonian(&cfg, &PotentialSpec::new(0.7, -1, power())).unwrap();
    let sys = BsSystem::new(&h).unwrap();
    let grid = ScanGrid {
        radial: 16,
        angular: 16,
    };
    let mut g = c.benchmark_group("characteristic_values");
    g.sample_size(10);
    g.bench_function("parallel", |b| b.iter(|| characteristic_values(&sys, 1, 0.01, 0.3, grid).unwrap()));
    g.bench_function("sequential", |b| {
        b.iter(|| par::sequential(|| characteristic_values(&sys, 1, 0.01, 0.3, grid).unwrap()))
    });
    g.finish();
}

criterion_group!(benches, bench_hamiltonian, bench_spectrum, bench_toeplitz, bench_charvals);
criterion_main!(benches);
