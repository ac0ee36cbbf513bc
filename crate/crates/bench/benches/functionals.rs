use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use kahler_bench::fixture;
use kahler_core::{
    default_t_grid, e_k_path, energy_between, lambda1_radial, make_metric, run_flow,
    solve_aubin_path, PathKind,
};

fn metrics(c: &mut Criterion) {
    let mut group = c.benchmark_group("make_metric");
    for grid in [64, 128, 256] {
        let fx = fixture(2, grid);
        group.bench_with_input(BenchmarkId::from_parameter(grid), &fx, |b, fx| {
            b.iter(|| make_metric(&fx.bg, &fx.phi).unwrap())
        });
    }
    group.finish();
}

fn energies(c: &mut Criterion) {
    let mut group = c.benchmark_group("energy_between");
    for n in 1..=3 {
        let fx = fixture(n, 128);
        group.bench_with_input(BenchmarkId::new("cp", n), &fx, |b, fx| {
            b.iter(|| energy_between(&fx.fs, &fx.state, n).unwrap())
        });
    }
    group.finish();

    let fx = fixture(2, 128);
    c.bench_function("e_k_path/cp2/k1", |b| {
        b.iter(|| e_k_path(&fx.bg, &fx.phi, 1, PathKind::Linear).unwrap())
    });
}

fn spectra_and_paths(c: &mut Criterion) {
    let fx = fixture(2, 128);
    c.bench_function("lambda1_radial/cp2", |b| {
        b.iter(|| lambda1_radial(&fx.state).unwrap())
    });

    let mut group = c.benchmark_group("slow");
    group.sample_size(10);
    let small = fixture(2, 64);
    group.bench_function("solve_aubin_path/cp2/64", |b| {
        b.iter(|| solve_aubin_path(&small.bg, &small.state, &default_t_grid()).unwrap())
    });
    let flow = fixture(2, 32);
    group.bench_function("run_flow/cp2/32/500", |b| {
        b.iter(|| run_flow(&flow.bg, &flow.phi, 1e-3, 500).unwrap())
    });
    group.finish();
}

criterion_group!(benches, metrics, energies, spectra_and_paths);
criterion_main!(benches);
