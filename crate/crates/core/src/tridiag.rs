//! Symmetric positive definite tridiagonal systems.
//!
//! Every linear solve in this crate is tridiagonal and SPD: the negative
//! Dirichlet Laplacian, the Newton systems `-(rho+tau)*L + diag(a)` with
//! `a >= 0`, the active-segment systems of the rate-independent stepper and
//! the per-node two-point boundary value problems of the control-space Riesz
//! map. A single LDL^T (Thomas) kernel serves them all; no pivoting is
//! needed for SPD input.

/// LDL^T factorization of a symmetric tridiagonal matrix.
///
/// `d` holds the pivots of D, `l` the subdiagonal of the unit lower
/// bidiagonal factor. Factor once, solve many right-hand sides in O(n).
#[derive(Debug, Clone)]
pub struct SpdTridiag {
    d: Vec<f64>,
    l: Vec<f64>,
}

impl SpdTridiag {
    /// Factors the matrix with diagonal `diag` (length n) and symmetric
    /// off-diagonal `off` (length n-1).
    ///
    /// Panics if a pivot is not strictly positive; callers only pass
    /// matrices that are SPD by construction, so a bad pivot is a
    /// programming error, not a data condition.
    pub fn factor(diag: &[f64], off: &[f64]) -> Self {
        let n = diag.len();
        assert!(n >= 1, "empty tridiagonal system");
        assert_eq!(off.len(), n - 1, "off-diagonal length must be n-1");
        let mut d = vec![0.0; n];
        let mut l = vec![0.0; n.saturating_sub(1)];
        d[0] = diag[0];
        assert!(d[0] > 0.0, "non-positive pivot at row 0: {}", d[0]);
        for i in 0..n - 1 {
            l[i] = off[i] / d[i];
            d[i + 1] = diag[i + 1] - off[i] * l[i];
            assert!(
                d[i + 1] > 0.0,
                "non-positive pivot at row {}: {}",
                i + 1,
                d[i + 1]
            );
        }
        Self { d, l }
    }

    pub fn n(&self) -> usize {
        self.d.len()
    }

    /// Solves A x = rhs in place.
    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        let n = self.d.len();
        assert_eq!(rhs.len(), n, "rhs length mismatch");
        for i in 1..n {
            rhs[i] -= self.l[i - 1] * rhs[i - 1];
        }
        for i in 0..n {
            rhs[i] /= self.d[i];
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= self.l[i] * rhs[i + 1];
        }
    }

    /// Solves A x = rhs into a fresh vector.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// One-shot solve of an SPD tridiagonal system.
pub fn solve_spd_tridiag(diag: &[f64], off: &[f64], rhs: &[f64]) -> Vec<f64> {
    SpdTridiag::factor(diag, off).solve(rhs)
}

/// y = A x for a symmetric tridiagonal matrix.
pub fn apply_tridiag(diag: &[f64], off: &[f64], x: &[f64]) -> Vec<f64> {
    let n = diag.len();
    assert_eq!(off.len() + 1, n);
    assert_eq!(x.len(), n);
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut v = diag[i] * x[i];
        if i > 0 {
            v += off[i - 1] * x[i - 1];
        }
        if i + 1 < n {
            v += off[i] * x[i + 1];
        }
        y[i] = v;
    }
    y
}
