//! Optimal control of a one-dimensional rate-independent evolution through
//! vanishing viscosity.
//!
//! The state `z` evolves on the interval `(0, L)` with homogeneous Dirichlet
//! conditions under a distributed load `g`, following the rate-independent
//! law: the driving force `lap(z) + g` may never leave `[-1, 1]`, and the
//! state moves only where the force sits at the matching bound (up at `+1`,
//! down at `-1`). Because the associated control-to-state map is
//! nondifferentiable, optimization works on a viscous regularization: the
//! modulus in the dissipation is smoothed with radius `rho` and a viscosity
//! `rho * lap(dz/dt)` is added, which turns the evolution into a smooth ODE
//! whose implicit Euler discretization has an exact discrete adjoint.
//!
//! The crate provides, in dependency order:
//!
//! * [`grid`], [`time`]: the finite-difference discretization, Sobolev and
//!   Bochner norms, and the control-space inner product,
//! * [`smoothing`]: the C^2 smoothed modulus,
//! * [`state`]: implicit Euler solvers for the regularized evolution, its
//!   exact linearization, and a primal-dual active-set stepper for the
//!   unregularized limit,
//! * [`adjoint`]: tracking objectives, the discrete adjoint, and reduced
//!   gradients through the control-space Riesz map,
//! * [`optimize`]: Barzilai-Borwein descent with Armijo safeguard and
//!   warm-started continuation driving `rho` to zero,
//! * [`verify`]: numerical checks of the limiting optimality system
//!   (complementarity, sign conditions, convergence rates, a-priori
//!   estimates),
//! * [`profiles`]: deterministic analytic loads and targets.

pub mod adjoint;
pub mod error;
pub mod grid;
pub mod optimize;
pub mod profiles;
pub mod smoothing;
pub mod state;
pub mod time;
pub mod tridiag;
pub mod verify;

pub use adjoint::{
    evaluate, objective_value, reduced_gradient, riesz_h1star, solve_adjoint, AdjointPair,
    Evaluation, ObjectiveSpec,
};
pub use error::SolverError;
pub use grid::{Field, SpatialGrid};
pub use optimize::{continuation_solve, minimize_at_rho, ContinuationSchedule, LevelRecord, OptimizeOutcome, OptimizeReport};
pub use profiles::{FieldProfile, LoadProfile};
pub use smoothing::SmoothedAbs;
pub use state::{
    solve_linearized, solve_rate_independent, solve_regularized, t_rho_solve, LinearizedSolution,
    RateIndependentSolution, RegStateProblem, RegularizedSolution, RiStateProblem,
};
pub use time::{bochner_norms, control_inner, control_norm, BochnerNorms, TimeGrid, Trajectory};
pub use verify::{
    check_complementarity, check_estimates, check_sign_conditions, kkt_report, rate_study,
    very_weak_adjoint_residual, EstimateCheck, KktReport, RateRow, RateStudy,
    SignConditionReport, SignConditionStats, TestBasis, VerifyOptions,
};
