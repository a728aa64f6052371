//! Time grid, space-time trajectories and Bochner-space quadrature.
//!
//! Trajectories store one [`Field`] per time node `t_k = k tau`,
//! `k = 0..=n_steps`. All integral norms follow one pair of conventions,
//! chosen to match the implicit Euler stepping exactly:
//!
//! * time integrals of nodal quantities use the left-rectangle rule
//!   `sum_{k=0}^{N-1} tau * f(t_k)`,
//! * time derivatives are backward differences, i.e. one rate per interval,
//!   `rate_k = (f_{k+1} - f_k)/tau`, and integrals of rates sum over the
//!   intervals.
//!
//! With these conventions summation by parts telescopes without remainder,
//! which is what makes the discrete adjoint identities in this crate exact
//! rather than `O(tau)`.

use crate::grid::{Field, SpatialGrid};

/// Uniform partition of `[0, horizon]` into `n_steps` intervals.
#[derive(Debug, Clone)]
pub struct TimeGrid {
    n_steps: usize,
    horizon: f64,
    tau: f64,
}

impl TimeGrid {
    pub fn new(n_steps: usize, horizon: f64) -> Self {
        assert!(n_steps >= 1, "need at least one time step");
        assert!(
            horizon.is_finite() && horizon > 0.0,
            "time horizon must be positive"
        );
        Self {
            n_steps,
            horizon,
            tau: horizon / n_steps as f64,
        }
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn node_t(&self, k: usize) -> f64 {
        k as f64 * self.tau
    }
}

/// One field per time node; `fields.len() == n_steps + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    fields: Vec<Field>,
}

impl Trajectory {
    pub fn zeros(tg: &TimeGrid, n_space: usize) -> Self {
        Self {
            fields: (0..=tg.n_steps()).map(|_| Field::zeros(n_space)).collect(),
        }
    }

    pub fn from_fields(fields: Vec<Field>) -> Self {
        assert!(!fields.is_empty(), "trajectory needs at least one field");
        let n = fields[0].len();
        assert!(
            fields.iter().all(|f| f.len() == n),
            "trajectory fields must share one grid"
        );
        Self { fields }
    }

    /// Samples a function of time and space at all nodes.
    pub fn from_fn(grid: &SpatialGrid, tg: &TimeGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            fields: (0..=tg.n_steps())
                .map(|k| {
                    let t = tg.node_t(k);
                    Field::from_fn(grid, |x| f(t, x))
                })
                .collect(),
        }
    }

    /// Number of time nodes (`n_steps + 1`).
    pub fn n_nodes(&self) -> usize {
        self.fields.len()
    }

    pub fn n_space(&self) -> usize {
        self.fields[0].len()
    }

    pub fn field(&self, k: usize) -> &Field {
        &self.fields[k]
    }

    pub fn field_mut(&mut self, k: usize) -> &mut Field {
        &mut self.fields[k]
    }

    pub fn fields(&self) -> &[Field] {
        &self.fields
    }

    pub fn last(&self) -> &Field {
        self.fields.last().unwrap()
    }

    /// Backward-difference rate on interval `k`: `(f_{k+1} - f_k)/tau`.
    pub fn rate(&self, tg: &TimeGrid, k: usize) -> Field {
        let mut r = self.fields[k + 1].minus(&self.fields[k]);
        let inv = 1.0 / tg.tau();
        for v in r.values_mut() {
            *v *= inv;
        }
        r
    }

    pub fn axpy(&mut self, a: f64, other: &Trajectory) {
        assert_eq!(self.n_nodes(), other.n_nodes(), "trajectory length mismatch");
        for (s, o) in self.fields.iter_mut().zip(&other.fields) {
            s.axpy(a, o);
        }
    }

    pub fn scaled(&self, a: f64) -> Trajectory {
        Trajectory {
            fields: self.fields.iter().map(|f| f.scaled(a)).collect(),
        }
    }

    pub fn minus(&self, other: &Trajectory) -> Trajectory {
        assert_eq!(self.n_nodes(), other.n_nodes(), "trajectory length mismatch");
        Trajectory {
            fields: self
                .fields
                .iter()
                .zip(&other.fields)
                .map(|(a, b)| a.minus(b))
                .collect(),
        }
    }

    pub fn norm_sup(&self) -> f64 {
        self.fields.iter().fold(0.0, |m, f| m.max(f.norm_sup()))
    }
}

/// Space-time norms of one trajectory under the crate's quadrature rules.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct BochnerNorms {
    /// `L2(I; H10)` norm (left rectangle).
    pub l2_h10: f64,
    /// `C(I; H10)` norm: max over all nodes.
    pub linf_h10: f64,
    /// `H1(I; L2)` norm: left-rectangle values plus interval rates.
    pub h1_l2: f64,
    /// `W11(I; H-1)` norm: `int |f| + int |df/dt|` in the dual spatial norm.
    pub w11_hm1: f64,
}

/// Evaluates the standard Bochner norms of a trajectory.
pub fn bochner_norms(grid: &SpatialGrid, tg: &TimeGrid, traj: &Trajectory) -> BochnerNorms {
    assert_eq!(traj.n_nodes(), tg.n_steps() + 1, "trajectory does not match time grid");
    let tau = tg.tau();
    let n = tg.n_steps();

    let mut l2_h10_sq = 0.0;
    let mut linf_h10: f64 = 0.0;
    let mut val_l2_sq = 0.0;
    let mut rate_l2_sq = 0.0;
    let mut l1_hm1 = 0.0;
    let mut rate_l1_hm1 = 0.0;

    for k in 0..=n {
        let f = traj.field(k);
        let nh = grid.norm_h10(f);
        linf_h10 = linf_h10.max(nh);
        if k < n {
            l2_h10_sq += tau * nh * nh;
            let nl = grid.norm_l2(f);
            val_l2_sq += tau * nl * nl;
            l1_hm1 += tau * grid.norm_hm1(f);
            let r = traj.rate(tg, k);
            let rl = grid.norm_l2(&r);
            rate_l2_sq += tau * rl * rl;
            rate_l1_hm1 += tau * grid.norm_hm1(&r);
        }
    }

    BochnerNorms {
        l2_h10: l2_h10_sq.sqrt(),
        linf_h10,
        h1_l2: (val_l2_sq + rate_l2_sq).sqrt(),
        w11_hm1: l1_hm1 + rate_l1_hm1,
    }
}

/// `C(I; H10)` distance between two trajectories: max over nodes of the
/// `H10` norm of the difference.
pub fn c_h10_distance(grid: &SpatialGrid, a: &Trajectory, b: &Trajectory) -> f64 {
    assert_eq!(a.n_nodes(), b.n_nodes(), "trajectory length mismatch");
    a.fields()
        .iter()
        .zip(b.fields())
        .fold(0.0, |m, (fa, fb)| m.max(grid.norm_h10(&fa.minus(fb))))
}

/// `L-infinity(I; H-1)` norm over all nodes.
pub fn linf_hm1(grid: &SpatialGrid, traj: &Trajectory) -> f64 {
    traj.fields()
        .iter()
        .fold(0.0, |m, f| m.max(grid.norm_hm1(f)))
}

/// `L1(I; H-1)` norm of the backward-difference rates.
pub fn l1_hm1_of_rates(grid: &SpatialGrid, tg: &TimeGrid, traj: &Trajectory) -> f64 {
    (0..tg.n_steps())
        .map(|k| tg.tau() * grid.norm_hm1(&traj.rate(tg, k)))
        .sum()
}

/// Squared `L2(I; H-1)` norm of the backward-difference rates.
pub fn l2_hm1_sq_of_rates(grid: &SpatialGrid, tg: &TimeGrid, traj: &Trajectory) -> f64 {
    (0..tg.n_steps())
        .map(|k| {
            let n = grid.norm_hm1(&traj.rate(tg, k));
            tg.tau() * n * n
        })
        .sum()
}

/// Inner product of the control space `H1(I; L2)` with `g(0) = 0`:
/// left-rectangle value part plus backward-difference rate part.
///
/// This bilinear form is the single source of truth for control-space
/// geometry: the objective's control cost, the Riesz representative of the
/// reduced gradient and every reported gradient norm all use it.
pub fn control_inner(
    grid: &SpatialGrid,
    tg: &TimeGrid,
    a: &Trajectory,
    b: &Trajectory,
) -> f64 {
    assert_eq!(a.n_nodes(), tg.n_steps() + 1, "trajectory does not match time grid");
    assert_eq!(b.n_nodes(), tg.n_steps() + 1, "trajectory does not match time grid");
    let tau = tg.tau();
    let mut s = 0.0;
    for k in 0..tg.n_steps() {
        s += tau * grid.inner_l2(a.field(k), b.field(k));
        s += tau * grid.inner_l2(&a.rate(tg, k), &b.rate(tg, k));
    }
    s
}

pub fn control_norm(grid: &SpatialGrid, tg: &TimeGrid, a: &Trajectory) -> f64 {
    control_inner(grid, tg, a, a).sqrt()
}
