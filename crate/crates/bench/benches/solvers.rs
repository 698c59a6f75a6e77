use criterion::{black_box, criterion_group, criterion_main, Criterion};
use spheroid_bench::{standard_problem, START};
use spheroid_core::{solve_adjoint, verify::fd_gradient_of};

fn solvers(c: &mut Criterion) {
    let problem = standard_problem();
    let state = problem.forward(&START).unwrap();

    c.bench_function("forward", |b| b.iter(|| problem.forward(black_box(&START)).unwrap()));
    c.bench_function("adjoint", |b| {
        b.iter(|| {
            solve_adjoint(
                black_box(&state),
                &problem.obs,
                &START,
                &problem.constants,
                &problem.shooting,
            )
            .unwrap()
        })
    });
    c.bench_function("reduced_objective", |b| {
        b.iter(|| problem.evaluate(black_box(&START)).unwrap())
    });
    c.bench_function("fd_gradient", |b| {
        b.iter(|| fd_gradient_of(&problem, black_box(&START), 1e-5).unwrap())
    });
}

criterion_group!(benches, solvers);
criterion_main!(benches);
