use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use homotopy_opt::{hsgd_run, sgd_run, HomotopyProblem, ParamVector, Schedule, SgdConfig, Stream};
use homotopy_opt_bench::{lq_problem, sine_problem, toy_problem};

fn gradients(c: &mut Criterion) {
    let mut group = c.benchmark_group("full_gradient");
    let toy = toy_problem();
    let w = ParamVector::scalar(0.7);
    group.bench_function("erf_n100", |b| {
        b.iter(|| toy.full_gradient(black_box(&w), 0.5))
    });
    let (mlp, p) = sine_problem(500);
    group.bench_function("mlp_n500", |b| {
        b.iter(|| mlp.full_gradient(black_box(&p), 0.5))
    });
    group.finish();
}

fn sgd(c: &mut Criterion) {
    let mut group = c.benchmark_group("sgd_run");
    let toy = toy_problem();
    for m in [1, 10, 100] {
        let cfg = SgdConfig::new(0.5, 1_000, m).unwrap();
        group.bench_with_input(BenchmarkId::new("erf_1000_steps", m), &cfg, |b, cfg| {
            b.iter(|| {
                sgd_run(
                    &ParamVector::scalar(-4.0),
                    cfg,
                    &toy,
                    1.0,
                    &mut Stream::new(1),
                    None,
                )
                .unwrap()
            })
        });
    }
    let (mlp, p) = sine_problem(500);
    let cfg = SgdConfig::new(0.05, 100, 5).unwrap();
    group.bench_function("mlp_100_steps_m5", |b| {
        b.iter(|| sgd_run(&p, &cfg, &mlp, 1.0, &mut Stream::new(1), None).unwrap())
    });
    group.finish();
}

fn hsgd(c: &mut Criterion) {
    let mut group = c.benchmark_group("hsgd_run");
    let lq = lq_problem(50);
    let cfg = SgdConfig::new(0.5, 10, 5).unwrap();
    for n in [10, 100] {
        let schedule = Schedule::exponential(n, 0.2).unwrap();
        group.bench_with_input(BenchmarkId::new("lq_k10", n), &schedule, |b, s| {
            b.iter(|| {
                hsgd_run(
                    &ParamVector::scalar(0.0),
                    s,
                    &cfg,
                    &lq,
                    &mut Stream::new(2),
                    None,
                )
                .unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, gradients, sgd, hsgd);
criterion_main!(benches);
