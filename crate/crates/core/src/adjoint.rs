//! Tracking objective, discrete adjoint and reduced gradient.
//!
//! The objective is
//!
//! ```text
//! J = alpha/2 int |z - z_d|_{L2}^2 dt + beta/2 |z(T) - z_T|_{L2}^2
//!   + 1/2 |g|^2 + prox_weight/2 |g - g_anchor|^2,
//! ```
//!
//! with the control norms taken in `H1(I; L2)` (see
//! [`control_inner`](crate::time::control_inner)) and the state integral
//! under the left-rectangle rule.
//!
//! The adjoint is the exact transpose of the linearized implicit Euler
//! scheme, obtained by summation by parts: with `A_k = -(rho+tau) L +
//! diag(second(w_k))` the backward sweep is
//!
//! ```text
//! q_N = beta (z_N - z_T),
//! A_k xi_{k+1} = q_{k+1},
//! q_k = q_{k+1} + tau ( L xi_{k+1} + alpha (z_k - z_{d,k}) ),
//! ```
//!
//! for `k = N-1, .., 0`, where `xi` is indexed by the node that closes its
//! interval (`xi_0 = 0` by convention since variations vanish at `t = 0`).
//! The sweep telescopes exactly against the linearized state, giving the
//! machine-precision identity
//!
//! ```text
//! sum_k tau <xi_k, h_k>_{L2} = d/ds J_state(S(g + s h)) |_{s=0},
//! ```
//!
//! so the only gradient error sources are the Newton tolerance of the
//! forward solve and floating-point rounding. The reduced gradient is the
//! Riesz representative of the total derivative in the control metric:
//! `r = riesz_h1star(xi) + (1 + prox_weight) g - prox_weight * g_anchor`.

use crate::error::SolverError;
use crate::grid::{Field, SpatialGrid};
use crate::state::{solve_regularized, RegStateProblem, RegularizedSolution};
use crate::time::{control_inner, TimeGrid, Trajectory};
use crate::tridiag::SpdTridiag;
use rayon::prelude::*;

/// Tracking data: distributed target, terminal target and their weights.
#[derive(Debug, Clone)]
pub struct ObjectiveSpec {
    pub alpha: f64,
    pub beta: f64,
    pub z_d: Trajectory,
    pub z_t: Field,
}

impl ObjectiveSpec {
    pub fn new(alpha: f64, beta: f64, z_d: Trajectory, z_t: Field) -> Self {
        assert!(alpha >= 0.0 && beta >= 0.0, "tracking weights must be nonnegative");
        Self { alpha, beta, z_d, z_t }
    }
}

/// Adjoint state `q` and multiplier `xi`, both stored at time nodes;
/// `xi.field(k+1)` belongs to interval `k` and `xi.field(0)` is zero.
#[derive(Debug, Clone)]
pub struct AdjointPair {
    pub q: Trajectory,
    pub xi: Trajectory,
}

/// Full objective value at a state/control pair.
///
/// `prox_weight` selects the proximal term; when it is nonzero an anchor
/// must be supplied.
pub fn objective_value(
    grid: &SpatialGrid,
    tg: &TimeGrid,
    spec: &ObjectiveSpec,
    z: &Trajectory,
    g: &Trajectory,
    g_anchor: Option<&Trajectory>,
    prox_weight: f64,
) -> f64 {
    assert_eq!(z.n_nodes(), tg.n_steps() + 1, "state does not match time grid");
    assert_eq!(spec.z_d.n_nodes(), z.n_nodes(), "target does not match time grid");
    let tau = tg.tau();
    let mut j = 0.0;
    if spec.alpha != 0.0 {
        let mut acc = 0.0;
        for k in 0..tg.n_steps() {
            let d = z.field(k).minus(spec.z_d.field(k));
            acc += tau * grid.inner_l2(&d, &d);
        }
        j += 0.5 * spec.alpha * acc;
    }
    if spec.beta != 0.0 {
        let d = z.last().minus(&spec.z_t);
        j += 0.5 * spec.beta * grid.inner_l2(&d, &d);
    }
    j += 0.5 * control_inner(grid, tg, g, g);
    if prox_weight != 0.0 {
        let anchor = g_anchor.expect("proximal objective needs an anchor control");
        let d = g.minus(anchor);
        j += 0.5 * prox_weight * control_inner(grid, tg, &d, &d);
    }
    j
}

/// Backward adjoint sweep at a converged forward solution.
pub fn solve_adjoint(
    prob: &RegStateProblem,
    spec: &ObjectiveSpec,
    sol: &RegularizedSolution,
) -> AdjointPair {
    let grid = prob.grid();
    let tg = prob.time();
    let n = grid.n_interior();
    let n_steps = tg.n_steps();
    assert_eq!(sol.rates.len(), n_steps, "solution does not match time grid");
    assert_eq!(spec.z_d.n_nodes(), n_steps + 1, "target does not match time grid");
    assert_eq!(spec.z_t.len(), n, "terminal target does not match grid");

    let tau = tg.tau();
    let visc = prob.rho() + tau;
    let h2 = grid.h() * grid.h();
    let off = vec![-visc / h2; n - 1];

    let mut q = Trajectory::zeros(tg, n);
    let mut xi = Trajectory::zeros(tg, n);
    *q.field_mut(n_steps) = sol.z.last().minus(&spec.z_t).scaled(spec.beta);

    for k in (0..n_steps).rev() {
        let w = &sol.rates[k];
        let diag: Vec<f64> = (0..n)
            .map(|i| visc * 2.0 / h2 + prob.sabs().second(w[i]))
            .collect();
        let xi_k = Field::from_vec(
            SpdTridiag::factor(&diag, &off).solve(q.field(k + 1).values()),
        );
        let mut qk = q.field(k + 1).clone();
        qk.axpy(tau, &grid.laplacian_apply(&xi_k));
        if spec.alpha != 0.0 {
            let track = sol.z.field(k).minus(spec.z_d.field(k));
            qk.axpy(tau * spec.alpha, &track);
        }
        *q.field_mut(k) = qk;
        *xi.field_mut(k + 1) = xi_k;
    }
    AdjointPair { q, xi }
}

/// Riesz representative of a load in the control space: returns `p` with
/// `p(0) = 0` and
///
/// ```text
/// <p, h>_{H1(I;L2)} = sum_{k=1}^{N} tau <f_k, h_k>_{L2}
/// ```
///
/// for every discrete `h` with `h(0) = 0`. Realized per spatial node by the
/// tridiagonal two-point boundary value problem `-p'' + p = f`, `p(0) = 0`,
/// `p'(T) = 0`, whose system matrix is exactly the Gram matrix of the
/// control inner product; the identity therefore holds to rounding, not to
/// discretization order. Nodes are independent and solved in parallel.
pub fn riesz_h1star(tg: &TimeGrid, f: &Trajectory) -> Trajectory {
    let n_steps = tg.n_steps();
    assert_eq!(f.n_nodes(), n_steps + 1, "load does not match time grid");
    let n_space = f.n_space();
    let tau = tg.tau();

    // Gram matrix of the control form on nodes 1..N: value mass tau at
    // nodes 1..N-1, rate couplings 1/tau on every interval.
    let mut diag = vec![tau + 2.0 / tau; n_steps];
    diag[n_steps - 1] = 1.0 / tau;
    if n_steps >= 2 {
        diag[n_steps - 2] = tau + 2.0 / tau;
    }
    let off = vec![-1.0 / tau; n_steps - 1];
    let gram = SpdTridiag::factor(&diag, &off);

    let columns: Vec<Vec<f64>> = (0..n_space)
        .into_par_iter()
        .map(|i| {
            let rhs: Vec<f64> = (1..=n_steps).map(|k| tau * f.field(k)[i]).collect();
            gram.solve(&rhs)
        })
        .collect();

    let mut p = Trajectory::zeros(tg, n_space);
    for k in 1..=n_steps {
        let field = p.field_mut(k);
        for (i, col) in columns.iter().enumerate() {
            field[i] = col[k - 1];
        }
    }
    p
}

/// Forward solve, adjoint solve and reduced gradient in one bundle.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub objective: f64,
    pub gradient: Trajectory,
    pub gradient_norm: f64,
    pub state: RegularizedSolution,
    pub adjoint: AdjointPair,
}

/// Evaluates objective and reduced gradient at a control.
pub fn evaluate(
    prob: &RegStateProblem,
    spec: &ObjectiveSpec,
    g: &Trajectory,
    g_anchor: Option<&Trajectory>,
    prox_weight: f64,
) -> Result<Evaluation, SolverError> {
    let state = solve_regularized(prob, g)?;
    Ok(evaluate_with_state(prob, spec, g, g_anchor, prox_weight, state))
}

/// Same as [`evaluate`], reusing an already computed forward solution
/// (the optimizer's line search has one in hand for the accepted trial).
pub(crate) fn evaluate_with_state(
    prob: &RegStateProblem,
    spec: &ObjectiveSpec,
    g: &Trajectory,
    g_anchor: Option<&Trajectory>,
    prox_weight: f64,
    state: RegularizedSolution,
) -> Evaluation {
    let adjoint = solve_adjoint(prob, spec, &state);
    let objective = objective_value(prob.grid(), prob.time(), spec, &state.z, g, g_anchor, prox_weight);
    let gradient = assemble_gradient(prob, g, g_anchor, prox_weight, &adjoint);
    let gradient_norm = control_inner(prob.grid(), prob.time(), &gradient, &gradient).sqrt();
    Evaluation {
        objective,
        gradient,
        gradient_norm,
        state,
        adjoint,
    }
}

/// `riesz(xi) + (1 + prox_weight) g - prox_weight * g_anchor`.
pub(crate) fn assemble_gradient(
    prob: &RegStateProblem,
    g: &Trajectory,
    g_anchor: Option<&Trajectory>,
    prox_weight: f64,
    adjoint: &AdjointPair,
) -> Trajectory {
    let mut r = riesz_h1star(prob.time(), &adjoint.xi);
    r.axpy(1.0 + prox_weight, g);
    if prox_weight != 0.0 {
        let anchor = g_anchor.expect("proximal gradient needs an anchor control");
        r.axpy(-prox_weight, anchor);
    }
    r
}

/// Reduced gradient of the (possibly proximal) objective at `g`, as the
/// Riesz representative in the control space.
pub fn reduced_gradient(
    prob: &RegStateProblem,
    spec: &ObjectiveSpec,
    g: &Trajectory,
    g_anchor: Option<&Trajectory>,
    prox_weight: f64,
) -> Result<Trajectory, SolverError> {
    Ok(evaluate(prob, spec, g, g_anchor, prox_weight)?.gradient)
}
