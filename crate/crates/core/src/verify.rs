//! Numerical audits of the optimality system and a-priori estimates.
//!
//! The checks fall into four groups:
//!
//! * **Complementarity**: at a solution of the limit problem the adjoint
//!   state is orthogonal to the sliding motion, `<q, phi |zdot|> = 0` for
//!   all smooth spatial test functions `phi`. The audit evaluates the
//!   pairing over a finite tensor basis of smooth bumps and reports the
//!   worst normalized residual; along a viscosity sweep it must decay.
//! * **Sign conditions**: the pair `(-q, xi)` lies in a normal cone to
//!   the graph of the scalar stopping law. Concretely, with
//!   `lambda = g + Lz`:
//!   moving up (rate > 0, lambda = 1) forces `q = 0`; stuck at the upper
//!   bound forces `q > 0, xi > 0`; strictly inside forces `xi = 0`
//!   (conjectured only, so reported and never asserted); stuck at the
//!   lower bound forces `q < 0, xi < 0`; moving down forces `q = 0`.
//!   Nodes are classified with scale-aware thresholds and violation
//!   fractions are always relative to the total node count, so enlarging
//!   the rate threshold can only shrink the moving sets and never
//!   increases their reported violation fractions.
//! * **Very weak adjoint identity**: the discrete adjoint recursion
//!   telescopes exactly, so for every discrete test trajectory `phi` with
//!   `phi(0) = 0`,
//!
//!   ```text
//!   sum_k tau <q_{k+1}, phidot_k> - sum_k tau <L xi_{k+1}, phi_k>
//!     = <beta (z_N - z_T), phi_N> + sum_k tau <alpha (z_k - z_{d,k}), phi_k>.
//!   ```
//!
//!   The residual over the basis is zero up to rounding at any bundle
//!   produced by the adjoint solver; it is asserted to 1e-8 relative.
//! * **A-priori estimates**: the energy bounds of the forward problem and
//!   the viscosity-uniform adjoint bound, each evaluated in its discrete
//!   form with margin `(rhs - lhs)/rhs`; a check fails only when the
//!   margin drops below the discretization tolerance.
//!
//! `rate_study` measures the vanishing-viscosity error
//! `e(rho) = |S(g) - S_rho(g)|_{C(I;H10)}` against a rate-independent
//! reference computed on a time grid refined by an integer factor, and
//! reports pairwise empirical orders, the least-squares slope and the
//! fitted constant of the bound `e <= C (1 + |z|_{H1(I;H10)}) sqrt(rho)`.

use crate::adjoint::{assemble_gradient, AdjointPair, ObjectiveSpec};
use crate::grid::{Field, SpatialGrid};
use crate::state::{
    solve_rate_independent, RegStateProblem, RegularizedSolution, RiStateProblem,
};
use crate::time::{control_norm, TimeGrid, Trajectory};
use rayon::prelude::*;
use serde::Serialize;

/// Guard for margin denominators; rhs values this small mean the
/// inequality degenerated to `lhs <= 0`.
const MARGIN_FLOOR: f64 = 1e-30;

/// Thresholds and basis sizes for the audits.
#[derive(Debug, Clone)]
pub struct VerifyOptions {
    /// Number of smooth bumps in the time direction of the test basis.
    pub n_time_basis: usize,
    /// Number of smooth bumps in space.
    pub n_space_basis: usize,
    /// A node is "moving" when its rate exceeds this fraction of the
    /// largest rate in the trajectory.
    pub rate_eps_rel: f64,
    /// A stuck node counts as "at the bound" when `lambda` is within this
    /// distance of +1 or -1.
    pub gap_eps: f64,
    /// A multiplier violates a zero or sign condition when it exceeds
    /// this fraction of the multiplier's own sup norm.
    pub sign_violation_rel: f64,
    /// Estimate checks fail below margin `-margin_tol`; the default
    /// absorbs the O(tau + h^2) discretization defects.
    pub margin_tol: f64,
    /// Time-grid refinement factor of the rate-study reference solve.
    pub refine: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            n_time_basis: 5,
            n_space_basis: 5,
            rate_eps_rel: 1e-6,
            gap_eps: 1e-3,
            sign_violation_rel: 1e-3,
            margin_tol: 0.05,
            refine: 4,
        }
    }
}

/// Smooth space-time test functions: tensor products of compactly
/// supported bumps. `time_interior` profiles vanish at both ends of the
/// time interval; `time_star` profiles vanish at `t = 0` only (the last
/// one is the ramp `t/T`, exercising the terminal pairing).
#[derive(Debug, Clone)]
pub struct TestBasis {
    /// Bump values at the time nodes, one vector per profile.
    pub time_interior: Vec<Vec<f64>>,
    /// Profiles with `phi(0) = 0` and free right end.
    pub time_star: Vec<Vec<f64>>,
    /// Smooth bumps sampled on the spatial grid, sup-normalized to 1.
    pub space: Vec<Field>,
}

/// Infinitely smooth bump on `(c - w, c + w)`, peak value 1 at `c`.
fn smooth_bump(s: f64, center: f64, width: f64) -> f64 {
    let u = (s - center) / width;
    if u.abs() < 1.0 {
        (1.0 - 1.0 / (1.0 - u * u)).exp()
    } else {
        0.0
    }
}

impl TestBasis {
    /// Tensor basis with `n_time x n_space` bump products (plus one time
    /// ramp in the `time_star` family).
    pub fn new(grid: &SpatialGrid, tg: &TimeGrid, n_time: usize, n_space: usize) -> Self {
        assert!(n_time >= 1 && n_space >= 1, "basis must be nonempty");
        let t_end = tg.horizon();
        let nodes: Vec<f64> = (0..=tg.n_steps()).map(|k| tg.node_t(k)).collect();

        let time_interior: Vec<Vec<f64>> = (0..n_time)
            .map(|j| {
                let center = t_end * (j as f64 + 1.0) / (n_time as f64 + 1.0);
                let width = t_end / (n_time as f64 + 1.0);
                nodes.iter().map(|&t| smooth_bump(t, center, width)).collect()
            })
            .collect();

        // For the very weak identity only phi(0) = 0 is required; keep
        // n_time - 1 interior bumps and add the ramp t/T so the terminal
        // term is exercised.
        let mut time_star: Vec<Vec<f64>> = time_interior
            .iter()
            .take(n_time.saturating_sub(1).max(1))
            .cloned()
            .collect();
        time_star.push(nodes.iter().map(|&t| t / t_end).collect());

        let length = grid.length();
        let space: Vec<Field> = (0..n_space)
            .map(|i| {
                let center = length * (i as f64 + 1.0) / (n_space as f64 + 1.0);
                let width = length / (n_space as f64 + 1.0);
                Field::from_fn(grid, |x| smooth_bump(x, center, width))
            })
            .collect();

        Self {
            time_interior,
            time_star,
            space,
        }
    }

    /// The default 5 x 5 audit basis.
    pub fn standard(grid: &SpatialGrid, tg: &TimeGrid) -> Self {
        Self::new(grid, tg, 5, 5)
    }
}

/// Violation statistics of one sign condition.
#[derive(Debug, Clone, Serialize)]
pub struct SignConditionStats {
    /// Fraction of all space-time nodes classified into this set.
    pub set_fraction: f64,
    /// Fraction of all space-time nodes that land in this set and
    /// violate the condition (relative to the TOTAL count, so shrinking
    /// the set can never raise the fraction).
    pub violation_fraction: f64,
    /// Mean violation magnitude over the set (0 for an empty set).
    pub mean_magnitude: f64,
}

impl SignConditionStats {
    fn empty() -> Self {
        Self {
            set_fraction: 0.0,
            violation_fraction: 0.0,
            mean_magnitude: 0.0,
        }
    }
}

/// Per-condition statistics of the normal-cone sign relations.
#[derive(Debug, Clone, Serialize)]
pub struct SignConditionReport {
    /// Rate > 0 (the bound `lambda = 1` is then active automatically):
    /// requires `q = 0`; magnitude is mean `|q|` on the set.
    pub moving_plus: SignConditionStats,
    /// Stuck with `lambda` at +1: requires `q > 0, xi > 0`; violations
    /// count wrong signs only.
    pub stuck_at_upper: SignConditionStats,
    /// Stuck strictly inside `|lambda| < 1`: the conjectured relation
    /// `xi = 0`; reported, never asserted.
    pub strictly_inside: SignConditionStats,
    /// Stuck with `lambda` at -1: requires `q < 0, xi < 0`.
    pub stuck_at_lower: SignConditionStats,
    /// Rate < 0: requires `q = 0`.
    pub moving_minus: SignConditionStats,
}

/// One audited inequality: `lhs <= rhs` with relative margin.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    /// `(rhs - lhs) / rhs`; nonnegative when the inequality holds.
    pub margin: f64,
    pub pass: bool,
}

fn estimate_check(name: &str, lhs: f64, rhs: f64, margin_tol: f64) -> EstimateCheck {
    let margin = (rhs - lhs) / rhs.max(MARGIN_FLOOR);
    EstimateCheck {
        name: name.to_string(),
        lhs,
        rhs,
        margin,
        pass: margin >= -margin_tol,
    }
}

/// Full audit of one solve bundle.
#[derive(Debug, Clone, Serialize)]
pub struct KktReport {
    /// Worst normalized complementarity pairing over the test basis.
    pub complementarity_q: f64,
    /// Control-metric norm of the stationarity residual; coincides with
    /// the reduced gradient norm by construction.
    pub stationarity: f64,
    /// Worst normalized residual of the very weak adjoint identity.
    pub very_weak_adjoint: f64,
    pub sign_conditions: SignConditionReport,
    pub estimate_checks: Vec<EstimateCheck>,
}

/// Worst normalized pairing `|sum_k tau <q_{k+1}, phi(t_{k+1}) |w_k|>|`
/// over the tensor basis, normalized by
/// `max_k |q_k|_{L2} * sum_k tau |w_k|_{L2}`.
///
/// Returns 0 for a vanishing adjoint or a stationary state.
pub fn check_complementarity(
    grid: &SpatialGrid,
    tg: &TimeGrid,
    z: &Trajectory,
    q: &Trajectory,
    basis: &TestBasis,
) -> f64 {
    let n_steps = tg.n_steps();
    assert_eq!(z.n_nodes(), n_steps + 1, "state does not match time grid");
    assert_eq!(q.n_nodes(), n_steps + 1, "adjoint does not match time grid");
    let tau = tg.tau();

    let rates: Vec<Field> = (0..n_steps).map(|k| z.rate(tg, k)).collect();
    let q_sup = (0..=n_steps)
        .map(|k| grid.inner_l2(q.field(k), q.field(k)).sqrt())
        .fold(0.0_f64, f64::max);
    let rate_l1: f64 = rates
        .iter()
        .map(|w| tau * grid.inner_l2(w, w).sqrt())
        .sum();
    let scale = q_sup * rate_l1;
    if scale == 0.0 {
        return 0.0;
    }

    let h = grid.h();
    let mut worst = 0.0_f64;
    for theta in &basis.time_interior {
        for s in &basis.space {
            let mut pairing = 0.0;
            for (k, w) in rates.iter().enumerate() {
                let qk = q.field(k + 1);
                let tv = theta[k + 1];
                if tv == 0.0 {
                    continue;
                }
                let mut inner = 0.0;
                for i in 0..grid.n_interior() {
                    inner += qk[i] * s[i] * w[i].abs();
                }
                pairing += tau * h * tv * inner;
            }
            worst = worst.max(pairing.abs());
        }
    }
    worst / scale
}

/// Classifies every space-time node by rate and constraint gap and
/// reports violation statistics of the five sign relations.
pub fn check_sign_conditions(
    grid: &SpatialGrid,
    tg: &TimeGrid,
    z: &Trajectory,
    g: &Trajectory,
    q: &Trajectory,
    xi: &Trajectory,
    opts: &VerifyOptions,
) -> SignConditionReport {
    let n_steps = tg.n_steps();
    let n = grid.n_interior();
    let total = (n_steps * n) as f64;

    let rates: Vec<Field> = (0..n_steps).map(|k| z.rate(tg, k)).collect();
    let rate_sup = rates.iter().map(Field::norm_sup).fold(0.0_f64, f64::max);
    let rate_eps = opts.rate_eps_rel * rate_sup;
    let q_sup = q.norm_sup();
    let xi_sup = xi.norm_sup();
    let q_tol = opts.sign_violation_rel * q_sup;
    let xi_tol = opts.sign_violation_rel * xi_sup;

    // Accumulators: set count, violation count, magnitude sum.
    let mut acc = [[0.0_f64; 3]; 5];
    for k in 0..n_steps {
        let lam = {
            let mut l = grid.laplacian_apply(z.field(k + 1));
            l.axpy(1.0, g.field(k + 1));
            l
        };
        let w = &rates[k];
        let qf = q.field(k + 1);
        let xf = xi.field(k + 1);
        for i in 0..n {
            let (idx, violated, magnitude) = if w[i] > rate_eps {
                // Moving up: q must vanish.
                (0, qf[i].abs() > q_tol, qf[i].abs())
            } else if w[i] < -rate_eps {
                // Moving down: q must vanish.
                (4, qf[i].abs() > q_tol, qf[i].abs())
            } else if lam[i] >= 1.0 - opts.gap_eps {
                // Stuck at the upper bound: both multipliers nonnegative.
                let wrong = qf[i] < -q_tol || xf[i] < -xi_tol;
                (1, wrong, (-qf[i]).max(0.0) + (-xf[i]).max(0.0))
            } else if lam[i] <= -1.0 + opts.gap_eps {
                // Stuck at the lower bound: both multipliers nonpositive.
                let wrong = qf[i] > q_tol || xf[i] > xi_tol;
                (3, wrong, qf[i].max(0.0) + xf[i].max(0.0))
            } else {
                // Strictly inside: conjectured xi = 0; reported only.
                (2, xf[i].abs() > xi_tol, xf[i].abs())
            };
            acc[idx][0] += 1.0;
            if violated {
                acc[idx][1] += 1.0;
            }
            acc[idx][2] += magnitude;
        }
    }

    let stats = |a: [f64; 3]| {
        if a[0] == 0.0 {
            SignConditionStats::empty()
        } else {
            SignConditionStats {
                set_fraction: a[0] / total,
                violation_fraction: a[1] / total,
                mean_magnitude: a[2] / a[0],
            }
        }
    };
    SignConditionReport {
        moving_plus: stats(acc[0]),
        stuck_at_upper: stats(acc[1]),
        strictly_inside: stats(acc[2]),
        stuck_at_lower: stats(acc[3]),
        moving_minus: stats(acc[4]),
    }
}

/// Worst normalized residual of the very weak adjoint identity over the
/// `time_star x space` basis. Zero up to rounding for bundles produced
/// by the adjoint solver, because the discrete recursion telescopes
/// exactly against any discrete test trajectory.
pub fn very_weak_adjoint_residual(
    grid: &SpatialGrid,
    tg: &TimeGrid,
    spec: &ObjectiveSpec,
    z: &Trajectory,
    adj: &AdjointPair,
    basis: &TestBasis,
) -> f64 {
    let n_steps = tg.n_steps();
    let tau = tg.tau();
    let terminal = z.last().minus(&spec.z_t).scaled(spec.beta);

    let mut worst = 0.0_f64;
    for s in &basis.space {
        let ls = grid.laplacian_apply(s);
        // Per time node: <q_k, s>, <xi_k, L s>, <alpha (z_k - z_dk), s>.
        let q_s: Vec<f64> = (0..=n_steps)
            .map(|k| grid.inner_l2(adj.q.field(k), s))
            .collect();
        let xi_ls: Vec<f64> = (0..=n_steps)
            .map(|k| grid.inner_l2(adj.xi.field(k), &ls))
            .collect();
        let track_s: Vec<f64> = (0..n_steps)
            .map(|k| {
                if spec.alpha == 0.0 {
                    0.0
                } else {
                    spec.alpha * grid.inner_l2(&z.field(k).minus(spec.z_d.field(k)), s)
                }
            })
            .collect();
        let terminal_s = grid.inner_l2(&terminal, s);

        for theta in &basis.time_star {
            let mut rate_term = 0.0;
            let mut laplace_term = 0.0;
            let mut track_term = 0.0;
            for k in 0..n_steps {
                rate_term += (theta[k + 1] - theta[k]) * q_s[k + 1];
                laplace_term += tau * theta[k] * xi_ls[k + 1];
                track_term += tau * theta[k] * track_s[k];
            }
            let terminal_term = theta[n_steps] * terminal_s;
            let residual = rate_term - laplace_term - terminal_term - track_term;
            let scale = rate_term
                .abs()
                .max(laplace_term.abs())
                .max(terminal_term.abs())
                .max(track_term.abs())
                .max(MARGIN_FLOOR);
            worst = worst.max(residual.abs() / scale);
        }
    }
    worst
}

/// One row of a vanishing-viscosity rate study.
#[derive(Debug, Clone, Serialize)]
pub struct RateRow {
    pub rho: f64,
    /// `|S(g) - S_rho(g)|_{C(I;H10)}` against the refined reference.
    pub error: f64,
    /// Pairwise empirical order against the previous row.
    pub order: Option<f64>,
}

/// Outcome of a viscosity sweep at fixed load.
#[derive(Debug, Clone, Serialize)]
pub struct RateStudy {
    pub rows: Vec<RateRow>,
    /// Least-squares slope of `log e` against `log rho`.
    pub ls_slope: f64,
    /// Largest `e / ((1 + |z|_{H1(I;H10)}) sqrt(rho))` over the sweep;
    /// the theory bounds it by a constant independent of the load.
    pub fitted_c: f64,
    /// `|z|_{H1(I;H10)}` of the reference solution.
    pub reference_norm: f64,
}

/// Piecewise-linear embedding of a trajectory into a time grid refined
/// by an integer factor; exact for the piecewise-linear-in-time discrete
/// control space.
fn refine_linear(tg: &TimeGrid, fine: &TimeGrid, traj: &Trajectory) -> Trajectory {
    let factor = fine.n_steps() / tg.n_steps();
    assert_eq!(factor * tg.n_steps(), fine.n_steps(), "refinement must be integer");
    let mut out = Trajectory::zeros(fine, traj.n_space());
    for j in 0..=fine.n_steps() {
        let k = (j / factor).min(tg.n_steps() - 1);
        let r = (j - k * factor) as f64 / factor as f64;
        let mut f = traj.field(k).scaled(1.0 - r);
        f.axpy(r, traj.field(k + 1));
        *out.field_mut(j) = f;
    }
    out
}

/// Restriction of a refined trajectory back to the coarse nodes.
fn restrict(tg: &TimeGrid, fine: &TimeGrid, traj: &Trajectory) -> Trajectory {
    let factor = fine.n_steps() / tg.n_steps();
    let fields: Vec<Field> = (0..=tg.n_steps())
        .map(|k| traj.field(k * factor).clone())
        .collect();
    Trajectory::from_fields(fields)
}

/// `|z|_{H1(I;H10)}` by left-rectangle quadrature of values and rates.
fn h1_h10_norm(grid: &SpatialGrid, tg: &TimeGrid, z: &Trajectory) -> f64 {
    let tau = tg.tau();
    let mut acc = 0.0;
    for k in 0..tg.n_steps() {
        let v = grid.norm_h10(z.field(k));
        let w = grid.norm_h10(&z.rate(tg, k));
        acc += tau * (v * v + w * w);
    }
    acc.sqrt()
}

/// Sweeps the viscosity at fixed load and measures the distance to the
/// rate-independent reference, solved on a `refine`-times finer time
/// grid. `rho_list` must be decreasing; levels run in parallel.
pub fn rate_study(
    grid: &SpatialGrid,
    tg: &TimeGrid,
    g: &Trajectory,
    rho_list: &[f64],
    refine: usize,
) -> RateStudy {
    assert!(!rho_list.is_empty(), "need at least one viscosity");
    assert!(
        rho_list.windows(2).all(|p| p[0] > p[1]),
        "viscosities must decrease strictly"
    );
    assert!(refine >= 1, "refinement factor must be at least 1");

    let fine_tg = TimeGrid::new(tg.n_steps() * refine, tg.horizon());
    let g_fine = refine_linear(tg, &fine_tg, g);
    let ri = RiStateProblem::new(grid.clone(), fine_tg.clone());
    let reference = solve_rate_independent(&ri, &g_fine)
        .expect("reference solve failed in rate study");
    let z_ref = restrict(tg, &fine_tg, &reference.z);
    let reference_norm = h1_h10_norm(grid, &fine_tg, &reference.z);

    let errors: Vec<f64> = rho_list
        .par_iter()
        .map(|&rho| {
            let prob = RegStateProblem::new(grid.clone(), tg.clone(), rho);
            let sol = crate::state::solve_regularized(&prob, g)
                .expect("regularized solve failed in rate study");
            crate::time::c_h10_distance(grid, &z_ref, &sol.z)
        })
        .collect();

    let mut rows = Vec::with_capacity(rho_list.len());
    for (i, (&rho, &error)) in rho_list.iter().zip(errors.iter()).enumerate() {
        let order = if i > 0 && errors[i - 1] > 0.0 && error > 0.0 {
            Some((errors[i - 1] / error).ln() / (rho_list[i - 1] / rho).ln())
        } else {
            None
        };
        rows.push(RateRow { rho, error, order });
    }

    // Least-squares slope of log e over log rho (positive rows only).
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.error > 0.0)
        .map(|r| (r.rho.ln(), r.error.ln()))
        .collect();
    let ls_slope = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let xm = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let ym = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let num: f64 = pts.iter().map(|p| (p.0 - xm) * (p.1 - ym)).sum();
        let den: f64 = pts.iter().map(|p| (p.0 - xm) * (p.0 - xm)).sum();
        num / den
    } else {
        0.0
    };

    let fitted_c = rows
        .iter()
        .map(|r| r.error / ((1.0 + reference_norm) * r.rho.sqrt()))
        .fold(0.0_f64, f64::max);

    RateStudy {
        rows,
        ls_slope,
        fitted_c,
        reference_norm,
    }
}

/// Evaluates the a-priori estimates in their discrete forms.
///
/// The forward energy bounds that the theory states for the
/// rate-independent problem are evaluated on an internally computed
/// reference solve of the same load; the viscous energy bound, the
/// smoothing sandwich, the initial-rate bound and the adjoint bound use
/// the supplied regularized bundle. `pair` supplies a second load and
/// solution for the two-load Lipschitz estimate; without one the
/// degenerate pair (both sides zero) is used.
pub fn check_estimates(
    prob: &RegStateProblem,
    spec: &ObjectiveSpec,
    g: &Trajectory,
    sol: &RegularizedSolution,
    adj: &AdjointPair,
    pair: Option<(&Trajectory, &RegularizedSolution)>,
    opts: &VerifyOptions,
) -> Vec<EstimateCheck> {
    let grid = prob.grid();
    let tg = prob.time();
    let tau = tg.tau();
    let n_steps = tg.n_steps();
    let rho = prob.rho();
    let sabs = prob.sabs();
    let tol = opts.margin_tol;
    let mut checks = Vec::new();

    // Load rates in the dual norm, shared by several bounds.
    let g_rates: Vec<Field> = (0..n_steps).map(|k| g.rate(tg, k)).collect();
    let g_rate_hm1: Vec<f64> = g_rates.iter().map(|r| grid.norm_hm1(r)).collect();

    // Rate-independent reference for the bounds stated on the limit
    // problem: the dissipation orthogonality and the per-step energy
    // estimate |w_k|_{H10} <= |gdot_k|_{H-1}.
    {
        let ri = RiStateProblem::new(grid.clone(), tg.clone());
        let reference =
            solve_rate_independent(&ri, g).expect("reference solve failed in estimate audit");
        let mut worst_negativity = 0.0_f64;
        let mut pairing_scale = 0.0_f64;
        let mut worst_rate = (0.0_f64, MARGIN_FLOOR);
        for k in 0..n_steps {
            let w = reference.z.rate(tg, k);
            // d/dt (Delta z + g) on the interval, paired with the rate:
            // nonnegative for the discrete stopping law.
            let mut lam_rate = grid.laplacian_apply(&w);
            lam_rate.axpy(1.0, &g_rates[k]);
            let pairing = grid.inner_l2(&w, &lam_rate);
            worst_negativity = worst_negativity.max(-pairing);
            pairing_scale = pairing_scale
                .max(grid.norm_h10(&w) * (grid.norm_h10(&w) + g_rate_hm1[k]));
            let wn = grid.norm_h10(&w);
            if wn - g_rate_hm1[k] > worst_rate.0 - worst_rate.1 {
                worst_rate = (wn, g_rate_hm1[k].max(MARGIN_FLOOR));
            }
        }
        checks.push(estimate_check(
            "dissipation_orthogonality",
            worst_negativity,
            1e-9 * pairing_scale.max(1.0),
            tol,
        ));
        checks.push(estimate_check(
            "rate_energy_bound",
            worst_rate.0,
            worst_rate.1,
            tol,
        ));
    }

    // Smoothing sandwich |v| <= value(v) <= |v| + rho on every computed
    // rate value.
    {
        let mut worst = 0.0_f64;
        for w in &sol.rates {
            for i in 0..grid.n_interior() {
                let v = w[i];
                let val = sabs.value(v);
                worst = worst.max(v.abs() - val).max(val - v.abs() - rho);
            }
        }
        checks.push(estimate_check(
            "smoothing_sandwich",
            worst,
            1e-12 * rho.max(1.0),
            tol,
        ));
    }

    // Initial-rate bound |zdot(0)|^2_{H10} <= meas(Omega), valid under
    // the compatibility |g(0)|_sup <= 1 that the solver enforces.
    {
        let w0 = grid.norm_h10(&sol.rates[0]);
        checks.push(estimate_check(
            "initial_rate_bound",
            w0 * w0,
            grid.length(),
            tol,
        ));
    }

    // Viscosity-uniform energy bound:
    // rho |zdot(T)|^2 + |zdot|^2_{L2(I;H10)}
    //   <= |gdot|^2_{L2(I;H-1)} + 3 rho meas(Omega).
    {
        let wt = grid.norm_h10(sol.rates.last().expect("nonempty rates"));
        let mut lhs = rho * wt * wt;
        let mut rhs = 3.0 * rho * grid.length();
        for k in 0..n_steps {
            let wn = grid.norm_h10(&sol.rates[k]);
            lhs += tau * wn * wn;
            rhs += tau * g_rate_hm1[k] * g_rate_hm1[k];
        }
        checks.push(estimate_check("viscous_energy_bound", lhs, rhs, tol));
    }

    // Two-load Lipschitz stability with the explicit constant 2:
    // |z2 - z1|_{C(I;H10)} <= 2 (|gdot2 - gdot1|_{L1(I;H-1)}
    //                             + |g2 - g1|_{Linf(I;H-1)}).
    {
        let (lhs, rhs) = match pair {
            Some((g2, sol2)) => {
                let dist = crate::time::c_h10_distance(grid, &sol.z, &sol2.z);
                let diff = g2.minus(g);
                let mut dot_l1 = 0.0;
                let mut sup = grid.norm_hm1(diff.field(0));
                for k in 0..n_steps {
                    dot_l1 += tau * grid.norm_hm1(&diff.rate(tg, k));
                    sup = sup.max(grid.norm_hm1(diff.field(k + 1)));
                }
                (dist, 2.0 * (dot_l1 + sup))
            }
            None => (0.0, 0.0),
        };
        checks.push(estimate_check("two_load_lipschitz", lhs, rhs, tol));
    }

    // Viscosity-uniform adjoint bound (backward Gronwall):
    // |q|_{Linf(I;H-1)} + sqrt(rho) |xi|_{L2(I;H10)}
    //   + |second(zdot) xi^2|^{1/2}_{L1(Q)}
    //   <= (1+T) e^T (|j2'(z(T))|_{H-1} + |j1'(z)|_{L2(I;H-1)}).
    {
        let q_sup = (0..=n_steps)
            .map(|k| grid.norm_hm1(adj.q.field(k)))
            .fold(0.0_f64, f64::max);
        let mut xi_l2_sq = 0.0;
        let mut curv = 0.0;
        for k in 0..n_steps {
            let xn = grid.norm_h10(adj.xi.field(k + 1));
            xi_l2_sq += tau * xn * xn;
            let w = &sol.rates[k];
            let xf = adj.xi.field(k + 1);
            let mut cell = 0.0;
            for i in 0..grid.n_interior() {
                cell += sabs.second(w[i]) * xf[i] * xf[i];
            }
            curv += tau * grid.h() * cell;
        }
        let lhs = q_sup + (rho * xi_l2_sq).sqrt() + curv.sqrt();

        let terminal = sol.z.last().minus(&spec.z_t).scaled(spec.beta);
        let mut track_l2_sq = 0.0;
        for k in 0..n_steps {
            if spec.alpha != 0.0 {
                let d = sol.z.field(k).minus(spec.z_d.field(k));
                let dn = spec.alpha * grid.norm_hm1(&d);
                track_l2_sq += tau * dn * dn;
            }
        }
        let t_end = tg.horizon();
        let rhs = (1.0 + t_end)
            * t_end.exp()
            * (grid.norm_hm1(&terminal) + track_l2_sq.sqrt());
        checks.push(estimate_check("adjoint_uniform_bound", lhs, rhs, tol));
    }

    checks
}

/// Builds the full audit report for one solve bundle.
pub fn kkt_report(
    prob: &RegStateProblem,
    spec: &ObjectiveSpec,
    g: &Trajectory,
    g_anchor: Option<&Trajectory>,
    prox_weight: f64,
    sol: &RegularizedSolution,
    adj: &AdjointPair,
    opts: &VerifyOptions,
) -> KktReport {
    let grid = prob.grid();
    let tg = prob.time();
    let basis = TestBasis::new(grid, tg, opts.n_time_basis, opts.n_space_basis);
    let complementarity_q = check_complementarity(grid, tg, &sol.z, &adj.q, &basis);
    let stationarity = control_norm(
        grid,
        tg,
        &assemble_gradient(prob, g, g_anchor, prox_weight, adj),
    );
    let very_weak_adjoint = very_weak_adjoint_residual(grid, tg, spec, &sol.z, adj, &basis);
    let sign_conditions = check_sign_conditions(grid, tg, &sol.z, g, &adj.q, &adj.xi, opts);
    let estimate_checks = check_estimates(prob, spec, g, sol, adj, None, opts);
    KktReport {
        complementarity_q,
        stationarity,
        very_weak_adjoint,
        sign_conditions,
        estimate_checks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adjoint::{evaluate, solve_adjoint};
    use crate::profiles::{FieldProfile, LoadProfile};
    use crate::state::solve_regularized;

    fn bundle(
        n: usize,
        steps: usize,
        rho: f64,
        alpha: f64,
        beta: f64,
        amp: f64,
    ) -> (
        RegStateProblem,
        ObjectiveSpec,
        Trajectory,
        RegularizedSolution,
        AdjointPair,
    ) {
        let grid = SpatialGrid::new(n, 1.0);
        let tg = TimeGrid::new(steps, 1.0);
        let prob = RegStateProblem::new(grid.clone(), tg.clone(), rho);
        let z_d = LoadProfile::Ramp(FieldProfile::Bump {
            center: 0.4,
            width: 0.3,
            amp: 0.2,
        })
        .eval(&grid, &tg);
        let z_t = z_d.last().clone();
        let spec = ObjectiveSpec::new(alpha, beta, z_d, z_t);
        let g = LoadProfile::Ramp(FieldProfile::Sine { mode: 1, amp }).eval(&grid, &tg);
        let sol = solve_regularized(&prob, &g).unwrap();
        let adj = solve_adjoint(&prob, &spec, &sol);
        (prob, spec, g, sol, adj)
    }

    #[test]
    fn complementarity_vanishes_in_trivial_cases() {
        let grid = SpatialGrid::new(19, 1.0);
        let tg = TimeGrid::new(25, 1.0);
        let basis = TestBasis::standard(&grid, &tg);
        let z = LoadProfile::Ramp(FieldProfile::Sine { mode: 1, amp: 0.5 }).eval(&grid, &tg);

        // Vanishing adjoint.
        let q = Trajectory::zeros(&tg, grid.n_interior());
        assert_eq!(check_complementarity(&grid, &tg, &z, &q, &basis), 0.0);

        // Stationary state, arbitrary adjoint.
        let z0 = Trajectory::zeros(&tg, grid.n_interior());
        let q = LoadProfile::Ramp(FieldProfile::Sine { mode: 2, amp: 2.0 }).eval(&grid, &tg);
        assert_eq!(check_complementarity(&grid, &tg, &z0, &q, &basis), 0.0);

        // A generic pairing is positive and finite.
        let r = check_complementarity(&grid, &tg, &z, &q, &basis);
        assert!(r.is_finite() && r > 0.0);
    }

    #[test]
    fn very_weak_identity_is_exact_for_solver_bundles() {
        let (prob, spec, _g, sol, adj) = bundle(21, 30, 0.08, 1.1, 0.6, 2.2);
        let basis = TestBasis::standard(prob.grid(), prob.time());
        let r = very_weak_adjoint_residual(prob.grid(), prob.time(), &spec, &sol.z, &adj, &basis);
        assert!(r <= 1e-12, "telescoping residual should be rounding-level, got {r}");

        // Perturbing the adjoint must break the identity.
        let mut broken = adj.clone();
        broken.q.field_mut(3)[2] += 0.1;
        let r =
            very_weak_adjoint_residual(prob.grid(), prob.time(), &spec, &sol.z, &broken, &basis);
        assert!(r > 1e-6, "perturbation went unnoticed: {r}");
    }

    #[test]
    fn stationarity_field_matches_reduced_gradient_norm() {
        let (prob, spec, g, sol, adj) = bundle(17, 24, 0.1, 0.9, 0.4, 1.8);
        let opts = VerifyOptions::default();
        let report = kkt_report(&prob, &spec, &g, None, 0.0, &sol, &adj, &opts);
        let ev = evaluate(&prob, &spec, &g, None, 0.0).unwrap();
        let rel = (report.stationarity - ev.gradient_norm).abs() / ev.gradient_norm.max(1e-30);
        assert!(rel <= 1e-12, "stationarity {} vs gradient norm {}", report.stationarity, ev.gradient_norm);
        assert!(report.very_weak_adjoint <= 1e-10);
        for c in &report.estimate_checks {
            assert!(c.lhs.is_finite() && c.rhs.is_finite());
        }
    }

    #[test]
    fn sign_classification_matches_manufactured_motion() {
        // Monotone ramp of one bump: the state moves upward where the
        // bump loads it, never downward.
        let grid = SpatialGrid::new(29, 1.0);
        let tg = TimeGrid::new(60, 1.0);
        let prob = RegStateProblem::new(grid.clone(), tg.clone(), 1e-4);
        let g = LoadProfile::Ramp(FieldProfile::Bump {
            center: 0.5,
            width: 0.35,
            amp: 2.5,
        })
        .eval(&grid, &tg);
        let sol = solve_regularized(&prob, &g).unwrap();
        let q = Trajectory::zeros(&tg, grid.n_interior());
        let xi = Trajectory::zeros(&tg, grid.n_interior());
        let opts = VerifyOptions::default();
        let rep = check_sign_conditions(&grid, &tg, &sol.z, &g, &q, &xi, &opts);

        assert!(rep.moving_plus.set_fraction > 0.05, "ramp must move the state");
        assert_eq!(rep.moving_minus.set_fraction, 0.0, "no downward motion under a ramp");
        // Zero multipliers violate nothing.
        for s in [
            &rep.moving_plus,
            &rep.stuck_at_upper,
            &rep.strictly_inside,
            &rep.stuck_at_lower,
            &rep.moving_minus,
        ] {
            assert_eq!(s.violation_fraction, 0.0);
            assert_eq!(s.mean_magnitude, 0.0);
        }
        // The five sets partition all nodes.
        let total: f64 = [
            &rep.moving_plus,
            &rep.stuck_at_upper,
            &rep.strictly_inside,
            &rep.stuck_at_lower,
            &rep.moving_minus,
        ]
        .iter()
        .map(|s| s.set_fraction)
        .sum();
        assert!((total - 1.0).abs() < 1e-12);

        // A tiny load never activates the constraint: on the limit solver,
        // where stuck nodes have exactly zero rate, everything lands in the
        // strict interior. (The viscous solver would creep at O(rho) and the
        // scale-relative rate threshold would flag that creep as motion.)
        let g_small =
            LoadProfile::Ramp(FieldProfile::Bump { center: 0.5, width: 0.35, amp: 0.3 })
                .eval(&grid, &tg);
        let ri = RiStateProblem::new(grid.clone(), tg.clone());
        let sol_small = solve_rate_independent(&ri, &g_small).unwrap();
        let rep =
            check_sign_conditions(&grid, &tg, &sol_small.z, &g_small, &q, &xi, &opts);
        assert!(rep.strictly_inside.set_fraction > 0.999);
    }

    #[test]
    fn enlarging_rate_threshold_never_raises_moving_violations() {
        let (prob, _spec, g, sol, adj) = bundle(19, 30, 0.05, 1.0, 0.5, 2.4);
        let grid = prob.grid();
        let tg = prob.time();
        let mut opts = VerifyOptions::default();
        let mut last_plus = f64::INFINITY;
        let mut last_minus = f64::INFINITY;
        for eps in [1e-8, 1e-6, 1e-3, 1e-1] {
            opts.rate_eps_rel = eps;
            let rep = check_sign_conditions(grid, tg, &sol.z, &g, &adj.q, &adj.xi, &opts);
            assert!(rep.moving_plus.violation_fraction <= last_plus + 1e-15);
            assert!(rep.moving_minus.violation_fraction <= last_minus + 1e-15);
            last_plus = rep.moving_plus.violation_fraction;
            last_minus = rep.moving_minus.violation_fraction;
        }
    }

    #[test]
    fn estimates_pass_on_a_ramp_bundle() {
        let (prob, spec, g, sol, adj) = bundle(25, 40, 0.05, 1.0, 0.5, 2.0);
        let opts = VerifyOptions::default();

        // Degenerate pair: trivially passing two-load check.
        let checks = check_estimates(&prob, &spec, &g, &sol, &adj, None, &opts);
        for c in &checks {
            assert!(c.pass, "check {} failed: lhs {} rhs {} margin {}", c.name, c.lhs, c.rhs, c.margin);
        }
        assert_eq!(checks.len(), 7);

        // Genuine pair: perturbed load, same solver.
        let g2 = {
            let mut g2 = g.clone();
            let bump = LoadProfile::Ramp(FieldProfile::Bump {
                center: 0.6,
                width: 0.25,
                amp: 0.4,
            })
            .eval(prob.grid(), prob.time());
            g2.axpy(1.0, &bump);
            g2
        };
        let sol2 = solve_regularized(&prob, &g2).unwrap();
        let checks =
            check_estimates(&prob, &spec, &g, &sol, &adj, Some((&g2, &sol2)), &opts);
        let lip = checks.iter().find(|c| c.name == "two_load_lipschitz").unwrap();
        assert!(lip.pass, "two-load bound failed: margin {}", lip.margin);
        assert!(lip.rhs > 0.0);
    }

    #[test]
    fn rate_study_shows_vanishing_viscosity_convergence() {
        let grid = SpatialGrid::new(39, 1.0);
        let tg = TimeGrid::new(80, 1.0);
        let g = LoadProfile::Ramp(FieldProfile::Bump {
            center: 0.5,
            width: 0.4,
            amp: 2.0,
        })
        .eval(&grid, &tg);
        let study = rate_study(&grid, &tg, &g, &[1e-1, 3e-2, 1e-2, 3e-3], 4);
        assert_eq!(study.rows.len(), 4);
        for pair in study.rows.windows(2) {
            assert!(
                pair[1].error <= pair[0].error,
                "errors must decrease with viscosity: {} -> {}",
                pair[0].error,
                pair[1].error
            );
        }
        assert!(study.ls_slope > 0.3, "slope too small: {}", study.ls_slope);
        assert!(study.fitted_c.is_finite() && study.fitted_c > 0.0);
        assert!(study.reference_norm > 0.0);
    }

    #[test]
    fn complementarity_residual_decays_along_viscosity_sweep() {
        let grid = SpatialGrid::new(21, 1.0);
        let tg = TimeGrid::new(40, 1.0);
        let basis = TestBasis::standard(&grid, &tg);
        let z_d = LoadProfile::Ramp(FieldProfile::Bump {
            center: 0.5,
            width: 0.35,
            amp: 0.3,
        })
        .eval(&grid, &tg);
        let spec = ObjectiveSpec::new(1.0, 0.5, z_d.clone(), z_d.last().clone());
        let g = LoadProfile::Ramp(FieldProfile::Sine { mode: 1, amp: 2.3 }).eval(&grid, &tg);

        let mut residuals = Vec::new();
        for rho in [1e-1, 1e-2, 1e-3] {
            let prob = RegStateProblem::new(grid.clone(), tg.clone(), rho);
            let sol = solve_regularized(&prob, &g).unwrap();
            let adj = solve_adjoint(&prob, &spec, &sol);
            residuals.push(check_complementarity(&grid, &tg, &sol.z, &adj.q, &basis));
        }
        assert!(
            residuals[2] < residuals[0],
            "complementarity residual failed to decay: {residuals:?}"
        );
    }

    #[test]
    fn basis_profiles_are_normalized_and_supported() {
        let grid = SpatialGrid::new(49, 1.0);
        let tg = TimeGrid::new(60, 2.0);
        let basis = TestBasis::new(&grid, &tg, 5, 5);
        assert_eq!(basis.time_interior.len(), 5);
        assert_eq!(basis.time_star.len(), 5);
        assert_eq!(basis.space.len(), 5);
        for theta in &basis.time_interior {
            assert_eq!(theta[0], 0.0);
            assert_eq!(theta[tg.n_steps()], 0.0);
            let peak = theta.iter().cloned().fold(0.0_f64, f64::max);
            assert!(peak > 0.8, "bump sampled well below its peak: {peak}");
        }
        let ramp = basis.time_star.last().unwrap();
        assert_eq!(ramp[0], 0.0);
        assert!((ramp[tg.n_steps()] - 1.0).abs() < 1e-15);
        for s in &basis.space {
            let peak = s.values().iter().cloned().fold(0.0_f64, f64::max);
            assert!(peak > 0.8);
        }
    }
}
