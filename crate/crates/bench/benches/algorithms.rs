use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ecplan_bench::{dispatch_problem, generation, load_matrix, proposal, sizing_inputs};
use ecplan_core::{default_pro_rata_key, optimize_sizing, project_key, solve_dispatch};
use std::hint::black_box;

fn allocation(c: &mut Criterion) {
    let mut group = c.benchmark_group("allocation");
    for &(periods, members) in &[(48, 15), (100, 20), (17_520, 20)] {
        let load = load_matrix(periods, members);
        let g = generation(periods, 8.0);
        let p = proposal(periods, members);
        let size = format!("{periods}x{members}");
        group.bench_with_input(BenchmarkId::new("pro_rata", &size), &(), |b, _| {
            b.iter(|| default_pro_rata_key(black_box(&g), load.view()).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("project", &size), &(), |b, _| {
            b.iter(|| project_key(black_box(p.view()), &g, load.view()).unwrap())
        });
    }
    group.finish();
}

fn dispatch(c: &mut Criterion) {
    let mut group = c.benchmark_group("dispatch");
    for periods in [24, 48, 96] {
        let problem = dispatch_problem(periods);
        group.bench_with_input(BenchmarkId::from_parameter(periods), &problem, |b, p| {
            b.iter(|| solve_dispatch(black_box(p)).unwrap())
        });
    }
    group.finish();
}

fn sizing(c: &mut Criterion) {
    let (scenario, catalog) = sizing_inputs();
    let mut group = c.benchmark_group("sizing");
    for parallel in [false, true] {
        group.bench_with_input(BenchmarkId::new("3x3", if parallel { "parallel" } else { "sequential" }), &parallel, |b, &par| {
            b.iter(|| optimize_sizing(black_box(&scenario), &catalog, par).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, allocation, dispatch, sizing);
criterion_main!(benches);
