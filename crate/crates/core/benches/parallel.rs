//! Sequential versus rayon execution of the hot paths.
//!
//! Without the `parallel` feature both variants run the sequential code.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use kgfw_core::cffv::{build_cffv_hamiltonian, split_meo, ParticleParams};
use kgfw_core::exec::{self, Mode};
use kgfw_core::fields::{FieldConfig, GridField};
use kgfw_core::fw::{exact_fw, verify_n_independence, FwOptions};
use kgfw_core::operator::spectral::real_spectrum;
use kgfw_core::operator::Grid;

const MODES: [(&str, Mode); 2] = [("sequential", Mode::Sequential), ("parallel", Mode::Parallel)];

fn n_sweep(c: &mut Criterion) {
    let g = Grid::new(1, 64, 40.0).unwrap();
    let gf = GridField::new(&g, &FieldConfig::uniform_e([0.02, 0.0, 0.0]), 1.0).unwrap();
    let p = ParticleParams::new(1.0, 1.0, None, 1.0).unwrap();
    let mut group = c.benchmark_group("n_independence_sweep");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            exec::set_mode(mode);
            b.iter(|| verify_n_independence(&gf, &p, &[1.0, 2.0, 3.0, 5.0], 1e-9, &FwOptions::default()).unwrap())
        });
    }
    group.finish();
}

fn landau_exact_fw(c: &mut Criterion) {
    let g = Grid::new(2, 20, 10.0).unwrap();
    let gf = GridField::new(&g, &FieldConfig::uniform_b([0.0, 0.0, 1.0]), 1.0).unwrap();
    let p = ParticleParams::new(1.0, 1.0, None, 1.0).unwrap();
    let mut group = c.benchmark_group("exact_fw_uniform_b");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            exec::set_mode(mode);
            b.iter(|| exact_fw(&split_meo(&gf, &p).unwrap(), true, &FwOptions::default()).unwrap())
        });
    }
    group.finish();
}

fn grid_setup_and_spectrum(c: &mut Criterion) {
    let g = Grid::new(2, 16, 12.0).unwrap();
    let f = FieldConfig::crossed([0.03, 0.0, 0.0], [0.0, 0.0, 0.3]);
    let p = ParticleParams::new(1.0, 1.0, None, 1.0).unwrap();
    let mut group = c.benchmark_group("cffv_spectrum_2d");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            exec::set_mode(mode);
            b.iter(|| {
                let gf = GridField::new(&g, &f, 1.0).unwrap();
                real_spectrum(&build_cffv_hamiltonian(&gf, &p).unwrap(), 1e-8).unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, n_sweep, landau_exact_fw, grid_setup_and_spectrum);
criterion_main!(benches);
