//! Manufactured Poisson problem `Δu = r` on a rectangle with Dirichlet data
//! taken from the exact solution
//! `u = sin(ω₁πx)sin(ω₁πy) + sin(ω₂πx)sin(ω₂πy)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, Rect};

/// Tolerance for accepting a point as lying on the boundary.
pub const BOUNDARY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoissonProblem {
    pub omega1: f64,
    pub omega2: f64,
    pub domain: Rect,
}

impl PoissonProblem {
    pub fn new(omega1: f64, omega2: f64, domain: Rect) -> Result<Self> {
        if !(omega1 > 0.0 && omega1.is_finite() && omega2 > 0.0 && omega2.is_finite()) {
            return Err(Error::Other(format!(
                "frequencies must be positive, got ({omega1}, {omega2})"
            )));
        }
        Ok(PoissonProblem {
            omega1,
            omega2,
            domain,
        })
    }

    pub fn on_unit_square(omega1: f64, omega2: f64) -> Result<Self> {
        Self::new(omega1, omega2, Rect::unit())
    }

    fn mode(omega: f64, p: Point) -> f64 {
        (omega * PI * p[0]).sin() * (omega * PI * p[1]).sin()
    }

    pub fn exact_solution(&self, p: Point) -> f64 {
        Self::mode(self.omega1, p) + Self::mode(self.omega2, p)
    }

    /// Right-hand side `r = Δu`.
    pub fn forcing(&self, p: Point) -> f64 {
        let k1 = 2.0 * PI * PI * self.omega1 * self.omega1;
        let k2 = 2.0 * PI * PI * self.omega2 * self.omega2;
        -k1 * Self::mode(self.omega1, p) - k2 * Self::mode(self.omega2, p)
    }

    pub fn boundary_value(&self, p: Point) -> Result<f64> {
        if !self.domain.on_boundary(p, BOUNDARY_TOL) {
            return Err(Error::Other(format!(
                "point ({}, {}) is not on the domain boundary",
                p[0], p[1]
            )));
        }
        Ok(self.exact_solution(p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_values() {
        let p = PoissonProblem::on_unit_square(1.0, 1.0).unwrap();
        assert!((p.exact_solution([0.5, 0.5]) - 2.0).abs() < 1e-15);
        let q = PoissonProblem::on_unit_square(1.0, 3.0).unwrap();
        assert!((q.exact_solution([0.25, 0.25]) - 1.0).abs() < 1e-15);
        assert_eq!(q.exact_solution([0.0, 0.3]), 0.0);
    }

    #[test]
    fn forcing_values() {
        let p = PoissonProblem::on_unit_square(1.0, 1.0).unwrap();
        assert!((p.forcing([0.5, 0.5]) + 4.0 * PI * PI).abs() < 1e-12);
        assert_eq!(p.forcing([0.0, 0.7]), 0.0);
    }

    #[test]
    fn boundary_data() {
        let p = PoissonProblem::on_unit_square(1.0, 1.0).unwrap();
        assert_eq!(p.boundary_value([0.0, 0.0]).unwrap(), 0.0);
        assert!(p.boundary_value([1.0, 0.5]).unwrap().abs() < 1e-15);
        assert!(p.boundary_value([0.5, 0.5]).is_err());
    }

    #[test]
    fn rejects_nonpositive_frequency() {
        assert!(PoissonProblem::on_unit_square(0.0, 1.0).is_err());
        assert!(PoissonProblem::on_unit_square(1.0, -2.0).is_err());
    }

    #[test]
    fn symmetric_in_coordinates() {
        let p = PoissonProblem::on_unit_square(1.0, 6.0).unwrap();
        for k in 0..50 {
            let x = (k as f64 * 0.137) % 1.0;
            let y = (k as f64 * 0.291) % 1.0;
            assert_eq!(p.exact_solution([x, y]), p.exact_solution([y, x]));
        }
    }
}
