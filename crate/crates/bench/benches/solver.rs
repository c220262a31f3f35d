//! Benchmarks for whole solver operations: single audited steps under
//! both oracles, the proximity potential, and a short full solve.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use sdp_bench::fixture_state;
use sdp_core::instance::potential;
use sdp_core::ipm::step;
use sdp_core::{solve, ExactOracle, NoiseModel, NoisyOracle, SolverParams};

const SHAPES: [(usize, usize); 3] = [(3, 3), (8, 12), (16, 24)];

fn bench_step_exact(c: &mut Criterion) {
    let mut group = c.benchmark_group("step_exact");
    let params = SolverParams::default();
    for (n, m) in SHAPES {
        let (inst, state) = fixture_state(n, m, 23);
        let mut oracle = ExactOracle::default();
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("n{n}_m{m}")),
            &(&inst, &state),
            |b, (inst, state)| {
                b.iter(|| step(black_box(inst), black_box(state), &params, &mut oracle, 0).unwrap())
            },
        );
    }
    group.finish();
}

fn bench_step_noisy(c: &mut Criterion) {
    let mut group = c.benchmark_group("step_noisy");
    let params = SolverParams::default();
    for (n, m) in SHAPES {
        let (inst, state) = fixture_state(n, m, 29);
        let mut oracle = NoisyOracle::new(NoiseModel::default()).unwrap();
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("n{n}_m{m}")),
            &(&inst, &state),
            |b, (inst, state)| {
                b.iter(|| step(black_box(inst), black_box(state), &params, &mut oracle, 0).unwrap())
            },
        );
    }
    group.finish();
}

fn bench_potential(c: &mut Criterion) {
    let mut group = c.benchmark_group("potential");
    for (n, m) in SHAPES {
        let (inst, state) = fixture_state(n, m, 31);
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("n{n}_m{m}")),
            &(&inst, &state),
            |b, (inst, state)| {
                b.iter(|| potential(black_box(inst), &state.y, state.eta).unwrap())
            },
        );
    }
    group.finish();
}

fn bench_short_solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_25_iterations");
    group.sample_size(20);
    let params = SolverParams {
        max_iters: 25,
        ..SolverParams::default()
    };
    for (n, m) in SHAPES {
        let (inst, state) = fixture_state(n, m, 37);
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("n{n}_m{m}")),
            &(&inst, &state),
            |b, (inst, state)| {
                b.iter(|| {
                    let mut oracle = ExactOracle::default();
                    solve(black_box(inst), &state.y, &params, &mut oracle).unwrap()
                })
            },
        );
    }
    group.finish();
}

criterion_group!(
    solver,
    bench_step_exact,
    bench_step_noisy,
    bench_potential,
    bench_short_solve
);
criterion_main!(solver);
