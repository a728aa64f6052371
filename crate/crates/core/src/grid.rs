//! Uniform one-dimensional grid, discrete Laplacian and Sobolev norms.
//!
//! The domain is the interval `(0, length)` with homogeneous Dirichlet
//! boundary conditions. A [`Field`] stores values at the `n_interior`
//! interior nodes `x_i = (i+1) h`, `h = length / (n_interior + 1)`; the
//! boundary values are identically zero and never stored.
//!
//! The discrete Laplacian is the standard second-difference stencil scaled
//! by `h^-2`. It is symmetric and negative definite, so `-L` has an SPD
//! tridiagonal factorization that the grid owns and reuses for every
//! inverse-Laplacian application.
//!
//! Norm conventions, used consistently everywhere in the crate:
//!
//! * `inner_l2(u, v)  = h * sum_i u_i v_i`
//! * `norm_h10(u)^2   = inner_l2(-L u, u)`, evaluated as the first-difference
//!   Dirichlet energy so it is exact and nonnegative in floating point,
//! * `norm_hm1(u)     = norm_h10(laplacian_solve(u))`, i.e. the dual norm is
//!   pulled back through the discrete inverse Laplacian. This makes
//!   `norm_hm1(L v) = norm_h10(v)` an identity of the discretization and
//!   gives the exact duality bound `inner_l2(u, v) <= norm_hm1(u) * norm_h10(v)`.

use crate::tridiag::SpdTridiag;

/// Values of a grid function at the interior nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(n: usize) -> Self {
        Self {
            values: vec![0.0; n],
        }
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        Self { values }
    }

    /// Samples a function of the space coordinate at the interior nodes.
    pub fn from_fn(grid: &SpatialGrid, f: impl Fn(f64) -> f64) -> Self {
        Self {
            values: (0..grid.n_interior()).map(|i| f(grid.node_x(i))).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    /// self += a * other
    pub fn axpy(&mut self, a: f64, other: &Field) {
        assert_eq!(self.len(), other.len(), "field length mismatch");
        for (s, o) in self.values.iter_mut().zip(&other.values) {
            *s += a * o;
        }
    }

    pub fn scaled(&self, a: f64) -> Field {
        Field {
            values: self.values.iter().map(|v| a * v).collect(),
        }
    }

    pub fn minus(&self, other: &Field) -> Field {
        assert_eq!(self.len(), other.len(), "field length mismatch");
        Field {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn plus(&self, other: &Field) -> Field {
        assert_eq!(self.len(), other.len(), "field length mismatch");
        Field {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn norm_sup(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl std::ops::Index<usize> for Field {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

impl std::ops::IndexMut<usize> for Field {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.values[i]
    }
}

/// Uniform grid on `(0, length)` with the factored negative Laplacian.
#[derive(Debug, Clone)]
pub struct SpatialGrid {
    n_interior: usize,
    length: f64,
    h: f64,
    neg_laplacian: SpdTridiag,
}

impl SpatialGrid {
    /// Requires `n_interior >= 2` and `length > 0`.
    pub fn new(n_interior: usize, length: f64) -> Self {
        assert!(n_interior >= 2, "need at least two interior nodes");
        assert!(
            length.is_finite() && length > 0.0,
            "domain length must be positive"
        );
        let h = length / (n_interior + 1) as f64;
        let diag = vec![2.0 / (h * h); n_interior];
        let off = vec![-1.0 / (h * h); n_interior - 1];
        Self {
            n_interior,
            length,
            h,
            neg_laplacian: SpdTridiag::factor(&diag, &off),
        }
    }

    pub fn n_interior(&self) -> usize {
        self.n_interior
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Coordinate of interior node `i` (0-based): `(i+1) h`.
    pub fn node_x(&self, i: usize) -> f64 {
        (i as f64 + 1.0) * self.h
    }

    /// Discrete Laplacian: `(L u)_i = (u_{i-1} - 2 u_i + u_{i+1}) / h^2`
    /// with zero boundary values. Negative definite.
    pub fn laplacian_apply(&self, u: &Field) -> Field {
        assert_eq!(u.len(), self.n_interior, "field does not match grid");
        let n = self.n_interior;
        let s = 1.0 / (self.h * self.h);
        let v = u.values();
        let mut out = vec![0.0; n];
        for i in 0..n {
            let left = if i > 0 { v[i - 1] } else { 0.0 };
            let right = if i + 1 < n { v[i + 1] } else { 0.0 };
            out[i] = (left - 2.0 * v[i] + right) * s;
        }
        Field::from_vec(out)
    }

    /// Solves `L u = f` (inverse Laplacian).
    pub fn laplacian_solve(&self, f: &Field) -> Field {
        assert_eq!(f.len(), self.n_interior, "field does not match grid");
        let neg_f: Vec<f64> = f.values().iter().map(|v| -v).collect();
        Field::from_vec(self.neg_laplacian.solve(&neg_f))
    }

    pub fn inner_l2(&self, u: &Field, v: &Field) -> f64 {
        assert_eq!(u.len(), self.n_interior, "field does not match grid");
        assert_eq!(v.len(), self.n_interior, "field does not match grid");
        self.h
            * u.values()
                .iter()
                .zip(v.values())
                .map(|(a, b)| a * b)
                .sum::<f64>()
    }

    pub fn norm_l2(&self, u: &Field) -> f64 {
        self.inner_l2(u, u).sqrt()
    }

    /// Dirichlet-energy inner product: `h * sum over edges of du dv / h^2`,
    /// including the two boundary edges. Equals `inner_l2(-L u, v)` exactly.
    pub fn inner_h10(&self, u: &Field, v: &Field) -> f64 {
        assert_eq!(u.len(), self.n_interior, "field does not match grid");
        assert_eq!(v.len(), self.n_interior, "field does not match grid");
        let n = self.n_interior;
        let a = u.values();
        let b = v.values();
        let mut s = a[0] * b[0] + a[n - 1] * b[n - 1];
        for i in 0..n - 1 {
            s += (a[i + 1] - a[i]) * (b[i + 1] - b[i]);
        }
        s / self.h
    }

    pub fn norm_h10(&self, u: &Field) -> f64 {
        self.inner_h10(u, u).sqrt()
    }

    /// Dual norm through the inverse Laplacian: `norm_h10(laplacian_solve(u))`.
    pub fn norm_hm1(&self, u: &Field) -> f64 {
        self.norm_h10(&self.laplacian_solve(u))
    }
}
