//! Simulation benchmarks: full runs of representative built-in variants and
//! the per-tick step cost on a warmed, mid-outbreak world.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use cyberdef_core::scenario::builtin_suite;
use cyberdef_core::sim;

/// Clone of one built-in variant spec.
fn variant(suite: &str, index: usize) -> cyberdef_core::scenario::ScenarioSpec {
    builtin_suite(suite).unwrap().variants[index].1.clone()
}

/// Whole-run cost across the interesting regimes: heavy threat pressure,
/// weak response (busiest worlds), and the adaptive controller.
fn full_runs(c: &mut Criterion) {
    let mut group = c.benchmark_group("sim_run");
    for spec in [variant("s1", 2), variant("s2", 0), variant("s4", 0)] {
        group.bench_function(spec.name.clone(), |b| {
            b.iter(|| sim::run(black_box(&spec), black_box(7)).unwrap())
        });
    }
    group.finish();
}

/// Single-tick cost once an outbreak is underway (the steady-state workload:
/// many infected nodes spreading, control centre triaging).
fn step_mid_outbreak(c: &mut Criterion) {
    let spec = variant("s2", 0);
    let mut world = sim::init_world(&spec, 7).unwrap();
    for _ in 0..50 {
        sim::step(&mut world, &spec);
    }
    c.bench_function("sim_step/mid-outbreak", |b| {
        b.iter_batched(
            || world.clone(),
            |mut w| sim::step(&mut w, black_box(&spec)),
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, full_runs, step_mid_outbreak);
criterion_main!(benches);
