//! Shared scenario builders for the benchmark targets: one moderately
//! sized smooth-ramp problem, built the same way every bench uses it so
//! numbers stay comparable across targets.

use ripvisc_core::{
    FieldProfile, LoadProfile, RegStateProblem, RiStateProblem, SpatialGrid, TimeGrid, Trajectory,
};

/// Interior nodes of the benchmark grid.
pub const BENCH_N_INTERIOR: usize = 99;

/// Euler steps of the benchmark time grid.
pub const BENCH_N_STEPS: usize = 200;

/// Viscosity of the smoothed benchmark solves.
pub const BENCH_RHO: f64 = 1e-2;

pub fn bench_grid() -> SpatialGrid {
    SpatialGrid::new(BENCH_N_INTERIOR, 1.0)
}

pub fn bench_time_grid() -> TimeGrid {
    TimeGrid::new(BENCH_N_STEPS, 1.0)
}

/// Smooth ramp of a centered bump: activates a moving set without ever
/// violating the force bound at the start.
pub fn bench_load(grid: &SpatialGrid, tg: &TimeGrid) -> Trajectory {
    LoadProfile::Ramp(FieldProfile::Bump {
        center: 0.5,
        width: 0.4,
        amp: 1.8,
    })
    .eval(grid, tg)
}

pub fn bench_reg_problem() -> RegStateProblem {
    RegStateProblem::new(bench_grid(), bench_time_grid(), BENCH_RHO)
}

pub fn bench_ri_problem() -> RiStateProblem {
    RiStateProblem::new(bench_grid(), bench_time_grid())
}
