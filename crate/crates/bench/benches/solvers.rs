//! Forward-solver benchmarks: the full smoothed sweep, the exact
//! active-set sweep, and the single resolvent application both build on.

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use ripvisc_bench::{bench_load, bench_reg_problem, bench_ri_problem};
use ripvisc_core::{solve_rate_independent, solve_regularized, t_rho_solve, Field};

fn forward_solvers(c: &mut Criterion) {
    let reg = bench_reg_problem();
    let ri = bench_ri_problem();
    let g = bench_load(reg.grid(), reg.time());

    c.bench_function("regularized_forward_sweep", |b| {
        b.iter(|| solve_regularized(&reg, black_box(&g)).unwrap())
    });

    c.bench_function("active_set_forward_sweep", |b| {
        b.iter(|| solve_rate_independent(&ri, black_box(&g)).unwrap())
    });

    // One implicit step off the converged first state: the inner kernel
    // every sweep amortizes.
    let sol = solve_regularized(&reg, &g).unwrap();
    let tau = reg.time().tau();
    let mut rhs = reg.grid().laplacian_apply(sol.z.field(1));
    rhs.axpy(1.0, g.field(2));
    let warm = Field::zeros(reg.grid().n_interior());
    c.bench_function("viscous_resolvent_step", |b| {
        b.iter(|| t_rho_solve(&reg, black_box(&rhs), tau, Some(&warm)).unwrap())
    });
}

criterion_group!(benches, forward_solvers);
criterion_main!(benches);
