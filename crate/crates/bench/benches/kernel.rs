use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use sectorflow_bench::{bump_field, demo_params, prepared_field};
use sectorflow_core::barrier::{self, Rule};
use sectorflow_core::kernel::{SectorKernel, DEFAULT_TOL};
use sectorflow_core::solver::{self, SimState};

fn kernel(c: &mut Criterion) {
    let field = bump_field(16);
    let k = SectorKernel::new(&field, 1.0, DEFAULT_TOL).unwrap();
    c.bench_function("q/bump16", |b| b.iter(|| k.q(std::hint::black_box([0.7, 0.4])).unwrap()));
    c.bench_function("grad_q/bump16", |b| b.iter(|| k.grad_q(std::hint::black_box([0.7, 0.4])).unwrap()));

    let p = demo_params();
    let prepared = prepared_field(&p, 12, 8);
    let mut g = c.benchmark_group("prepared12x8");
    g.sample_size(10);
    g.bench_function("velocity_sweep", |b| {
        b.iter(|| solver::marker_velocity(&prepared, p.alpha, DEFAULT_TOL).unwrap())
    });
    g.bench_function("rk4_step", |b| {
        b.iter_batched(
            || SimState::new(prepared.clone()).unwrap(),
            |s| solver::step(&s, 1e-4, p.alpha, DEFAULT_TOL).unwrap(),
            BatchSize::LargeInput,
        )
    });
    g.finish();
}

fn barrier_quadrature(c: &mut Criterion) {
    c.bench_function("f0/adaptive", |b| {
        b.iter(|| barrier::f0(std::hint::black_box(0.7), 0.1, 1.0, 0.1).unwrap())
    });
    c.bench_function("f0/gauss64", |b| {
        b.iter(|| barrier::f0_with(std::hint::black_box(0.7), 0.1, 1.0, 0.1, Rule::Gauss(64)).unwrap())
    });
    c.bench_function("m1", |b| b.iter(|| barrier::m1(std::hint::black_box(1.0))));
}

criterion_group!(benches, kernel, barrier_quadrature);
criterion_main!(benches);
