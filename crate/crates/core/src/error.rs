//! Runtime failure modes of the solvers and the optimizer.

use thiserror::Error;

/// Recoverable solver failures. Contract violations (dimension mismatches,
/// invalid grids) panic instead; these variants are data-dependent
/// conditions a caller may want to report or react to.
#[derive(Debug, Clone, Error)]
pub enum SolverError {
    /// Damped Newton failed to reach the residual tolerance.
    #[error("Newton iteration diverged at time step {step}: residual {residual:.3e} after {iterations} iterations")]
    NewtonDivergence {
        step: usize,
        iterations: usize,
        residual: f64,
    },

    /// The load violates the initial compatibility condition `|g(0)|_sup <= 1`.
    #[error("incompatible initial load: |g(0)|_sup = {sup:.6} exceeds 1")]
    CompatibilityViolation { sup: f64 },

    /// The active-set stepper kept cycling after all retry budgets.
    #[error("active-set iteration cycled at time step {step}")]
    PdasCycle { step: usize },

    /// Armijo backtracking could not produce descent.
    #[error("line search stalled at outer iteration {iteration} (step {step:.3e})")]
    LineSearchStall { iteration: usize, step: f64 },
}
