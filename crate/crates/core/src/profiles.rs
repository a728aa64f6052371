//! Analytic load and target families used by experiments and tests.
//!
//! A [`FieldProfile`] is a named function of space; a [`LoadProfile`] pairs
//! one with a time modulation. Both evaluate deterministically on a given
//! grid, so configurations that name them reproduce bit-identical inputs.

use crate::grid::{Field, SpatialGrid};
use crate::time::{TimeGrid, Trajectory};

/// Named spatial profiles on `(0, length)`.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldProfile {
    Zero,
    /// `amp * exp(1 - 1/(1 - u^2))` with `u = (x - center)/width`, zero
    /// outside `|u| < 1`; a C-infinity bump with peak value `amp`.
    Bump { center: f64, width: f64, amp: f64 },
    /// `amp * sin(mode * pi * x / length)`.
    Sine { mode: u32, amp: f64 },
}

impl FieldProfile {
    pub fn eval(&self, grid: &SpatialGrid) -> Field {
        match *self {
            FieldProfile::Zero => Field::zeros(grid.n_interior()),
            FieldProfile::Bump { center, width, amp } => Field::from_fn(grid, |x| {
                let u = (x - center) / width;
                if u.abs() < 1.0 {
                    amp * (1.0 - 1.0 / (1.0 - u * u)).exp()
                } else {
                    0.0
                }
            }),
            FieldProfile::Sine { mode, amp } => {
                let l = grid.length();
                Field::from_fn(grid, |x| {
                    amp * (mode as f64 * std::f64::consts::PI * x / l).sin()
                })
            }
        }
    }
}

/// Named time modulations of a spatial profile.
#[derive(Debug, Clone, PartialEq)]
pub enum LoadProfile {
    Zero,
    /// `g(t, x) = t * u(x)`; vanishes at `t = 0`, so always compatible.
    Ramp(FieldProfile),
    /// `g(t, x) = u(x)` for all `t`; compatible iff `sup |u| <= 1`.
    Constant(FieldProfile),
    /// `g(t, x) = sin(2 pi cycles t / T) * u(x)`; loading with reversals.
    Oscillate { cycles: f64, profile: FieldProfile },
}

impl LoadProfile {
    pub fn eval(&self, grid: &SpatialGrid, tg: &TimeGrid) -> Trajectory {
        let n = grid.n_interior();
        match self {
            LoadProfile::Zero => Trajectory::zeros(tg, n),
            LoadProfile::Ramp(p) => {
                let u = p.eval(grid);
                Trajectory::from_fields(
                    (0..=tg.n_steps()).map(|k| u.scaled(tg.node_t(k))).collect(),
                )
            }
            LoadProfile::Constant(p) => {
                let u = p.eval(grid);
                Trajectory::from_fields(vec![u; tg.n_steps() + 1])
            }
            LoadProfile::Oscillate { cycles, profile } => {
                let u = profile.eval(grid);
                let omega = 2.0 * std::f64::consts::PI * cycles / tg.horizon();
                Trajectory::from_fields(
                    (0..=tg.n_steps())
                        .map(|k| u.scaled((omega * tg.node_t(k)).sin()))
                        .collect(),
                )
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_is_compactly_supported_with_unit_peak() {
        let grid = SpatialGrid::new(199, 1.0);
        let f = FieldProfile::Bump {
            center: 0.5,
            width: 0.2,
            amp: 3.0,
        }
        .eval(&grid);
        assert_eq!(f.norm_sup(), 3.0); // node 99 sits exactly at the center
        for i in 0..grid.n_interior() {
            let x = grid.node_x(i);
            if (x - 0.5).abs() >= 0.2 {
                assert_eq!(f[i], 0.0);
            }
        }
    }

    #[test]
    fn ramp_vanishes_at_zero_and_grows_linearly() {
        let grid = SpatialGrid::new(9, 1.0);
        let tg = TimeGrid::new(4, 2.0);
        let g = LoadProfile::Ramp(FieldProfile::Sine { mode: 1, amp: 2.0 }).eval(&grid, &tg);
        assert_eq!(g.field(0).norm_sup(), 0.0);
        let ratio = g.field(4)[3] / g.field(2)[3];
        assert!((ratio - 2.0).abs() < 1e-13);
    }
}
