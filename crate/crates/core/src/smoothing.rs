//! Smoothed absolute value with compactly supported curvature.
//!
//! For a smoothing radius `rho > 0` the modulus is replaced inside
//! `[-rho, rho]` by an even C^2 polynomial that matches `|v|` in value and
//! slope at `|v| = rho`:
//!
//! ```text
//! value(v)  = rho/3 + v^2/rho - |v|^3 / (3 rho^2)      for |v| <= rho,
//!           = |v|                                       otherwise,
//! first(v)  = sign(v) (2|v|/rho - v^2/rho^2)            for |v| <= rho,
//!           = sign(v)                                    otherwise,
//! second(v) = (2/rho^2) max(rho - |v|, 0).
//! ```
//!
//! The derivative profile is the hat-shaped curvature `second`, so `first`
//! is C^1 with `first' in [0, 2/rho]`, `first` is odd and takes values in
//! `[-1, 1]`, and the key one-sided bounds hold exactly:
//! `|v| <= value(v) <= |v| + rho` (the defect is `(rho - |v|)^3 / (3 rho^2)`
//! inside the smoothing window) and `first(v) * v >= |v| - rho`.
//!
//! Everything downstream (state solvers, adjoints, the viscous continuation)
//! only touches the modulus through this type.

/// Smoothed modulus and its first two derivatives for one radius `rho`.
#[derive(Debug, Clone, Copy)]
pub struct SmoothedAbs {
    rho: f64,
}

impl SmoothedAbs {
    pub fn new(rho: f64) -> Self {
        assert!(
            rho.is_finite() && rho > 0.0,
            "smoothing radius must be positive, got {rho}"
        );
        Self { rho }
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Smoothed `|v|`.
    pub fn value(&self, v: f64) -> f64 {
        let r = self.rho;
        let s = v.abs();
        if s >= r {
            s
        } else {
            r / 3.0 + s * s / r - s * s * s / (3.0 * r * r)
        }
    }

    /// Derivative of [`Self::value`]; odd, ranges over `[-1, 1]`.
    pub fn first(&self, v: f64) -> f64 {
        let r = self.rho;
        let s = v.abs();
        if s >= r {
            v.signum()
        } else {
            v.signum() * (2.0 * s / r - s * s / (r * r))
        }
    }

    /// Second derivative of [`Self::value`]; even, in `[0, 2/rho]`, zero
    /// outside the smoothing window.
    pub fn second(&self, v: f64) -> f64 {
        let r = self.rho;
        let s = v.abs();
        if s >= r {
            0.0
        } else {
            2.0 / (r * r) * (r - s)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn closed_form_checkpoints() {
        for rho in [1e-4, 1e-2, 0.5, 3.0] {
            let f = SmoothedAbs::new(rho);
            assert_relative_eq!(f.second(0.0), 2.0 / rho, max_relative = 1e-14);
            assert_relative_eq!(f.second(rho / 2.0), 1.0 / rho, max_relative = 1e-14);
            assert_relative_eq!(f.first(rho / 2.0), 0.75, max_relative = 1e-14);
            assert_relative_eq!(f.value(0.0), rho / 3.0, max_relative = 1e-14);
            assert_relative_eq!(f.value(rho / 2.0), 13.0 * rho / 24.0, max_relative = 1e-14);
            assert_relative_eq!(f.value(rho), rho, max_relative = 1e-14);
            assert_eq!(f.first(2.0 * rho), 1.0);
            assert_eq!(f.first(-2.0 * rho), -1.0);
            assert_eq!(f.second(1.5 * rho), 0.0);
        }
    }

    #[test]
    fn derivatives_match_central_differences() {
        // Probe well inside and well outside the smoothing window, away from
        // the curvature kinks at v = 0 and |v| = rho.
        let rho = 0.37;
        let f = SmoothedAbs::new(rho);
        let step = rho * 1e-4;
        let probes: Vec<f64> = [0.15, 0.4, 0.6, 0.85, 1.2, 1.8, 2.6]
            .iter()
            .flat_map(|&s| [s * rho, -s * rho])
            .collect();
        for v in probes {
            let d_value = (f.value(v + step) - f.value(v - step)) / (2.0 * step);
            assert_relative_eq!(d_value, f.first(v), max_relative = 1e-6, epsilon = 1e-9);
            let d_first = (f.first(v + step) - f.first(v - step)) / (2.0 * step);
            assert_relative_eq!(d_first, f.second(v), max_relative = 1e-6, epsilon = 1e-9);
        }
    }

    proptest! {
        #[test]
        fn modulus_axioms(
            rho in 1e-6f64..1e2,
            scale in -3.0f64..3.0,
        ) {
            let v = scale * rho;
            let f = SmoothedAbs::new(rho);
            // Symmetry.
            prop_assert_eq!(f.value(-v), f.value(v));
            prop_assert_eq!(f.first(-v), -f.first(v));
            prop_assert_eq!(f.second(-v), f.second(v));
            // Ranges.
            prop_assert!(f.second(v) >= 0.0 && f.second(v) <= 2.0 / rho * (1.0 + 1e-12));
            prop_assert!(f.first(v).abs() <= 1.0 + 1e-12);
            // Sandwich between |v| and |v| + rho.
            prop_assert!(f.value(v) >= v.abs() - 1e-12 * rho.max(v.abs()));
            prop_assert!(f.value(v) <= v.abs() + rho * (1.0 + 1e-12));
            // Exact match outside the window.
            if v.abs() >= rho {
                prop_assert_eq!(f.value(v), v.abs());
            }
            // Dissipation lower bound.
            prop_assert!(f.first(v) * v >= v.abs() - rho * (1.0 + 1e-12));
        }

        #[test]
        fn first_is_monotone(
            rho in 1e-6f64..1e2,
            a in -4.0f64..4.0,
            b in -4.0f64..4.0,
        ) {
            let f = SmoothedAbs::new(rho);
            let (x, y) = (a * rho, b * rho);
            prop_assert!((f.first(x) - f.first(y)) * (x - y) >= -1e-15);
        }
    }
}
