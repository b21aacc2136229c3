//! Composite PINN objectives for the local and coarse networks, the
//! interface target rule, and the coupling-weight schedule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::neuralnet::{LossSpec, LossTerm, Operator};
use crate::problems::PoissonProblem;
use crate::sampling::SampleSets;

pub const TERM_INTERIOR: &str = "interior";
pub const TERM_BOUNDARY: &str = "boundary";
pub const TERM_INTERFACE: &str = "interface";
pub const TERM_FINE: &str = "fine";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_interior: f64,
    pub lambda_boundary: f64,
    pub lambda_interface: f64,
    /// Weight of the fine-to-coarse consistency term.
    pub lambda_f: f64,
    /// Share of the neighbour trace in the interface targets.
    pub lambda_c: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda_interior: 1.0,
            lambda_boundary: 1.0,
            lambda_interface: 1.0,
            lambda_f: 0.0,
            lambda_c: 1.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("lambda_interior", self.lambda_interior),
            ("lambda_boundary", self.lambda_boundary),
            ("lambda_interface", self.lambda_interface),
            ("lambda_f", self.lambda_f),
            ("lambda_c", self.lambda_c),
        ];
        if let Some((name, v)) = named.iter().find(|(_, v)| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Loss(format!("{name} must be finite and >= 0, got {v}")));
        }
        if self.lambda_c > 1.0 {
            return Err(Error::Loss(format!(
                "lambda_c must lie in [0, 1], got {}",
                self.lambda_c
            )));
        }
        Ok(())
    }
}

/// Frozen Dirichlet targets on the interface points of one subdomain.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceTargets {
    pub subdomain: usize,
    pub points: Vec<Point>,
    pub values: Vec<f64>,
}

fn pde_terms(sets: &SampleSets, problem: &PoissonProblem, weights: &LossWeights) -> Result<Vec<LossTerm>> {
    let forcing: Vec<f64> = sets.interior.iter().map(|&p| problem.forcing(p)).collect();
    let boundary = sets
        .outer_boundary
        .iter()
        .map(|&p| problem.boundary_value(p))
        .collect::<Result<Vec<f64>>>()?;
    Ok(vec![
        LossTerm::new(
            TERM_INTERIOR,
            Operator::Laplacian,
            weights.lambda_interior,
            sets.interior.clone(),
            forcing,
        ),
        LossTerm::new(
            TERM_BOUNDARY,
            Operator::Value,
            weights.lambda_boundary,
            sets.outer_boundary.clone(),
            boundary,
        ),
    ])
}

/// PDE residual + outer boundary + Dirichlet interface matching.
pub fn local_loss_spec(
    sets: &SampleSets,
    problem: &PoissonProblem,
    targets: &InterfaceTargets,
    weights: &LossWeights,
) -> Result<LossSpec> {
    weights.validate()?;
    if sets.interior.is_empty() {
        return Err(Error::Loss("subdomain has no interior points".into()));
    }
    if targets.points != sets.interface || targets.values.len() != sets.interface.len() {
        return Err(Error::Loss(format!(
            "interface targets ({} values) do not cover the {} interface points",
            targets.values.len(),
            sets.interface.len()
        )));
    }
    let mut terms = pde_terms(sets, problem, weights)?;
    terms.push(LossTerm::new(
        TERM_INTERFACE,
        Operator::Value,
        weights.lambda_interface,
        targets.points.clone(),
        targets.values.clone(),
    ));
    Ok(LossSpec::new(terms))
}

/// PDE residual + boundary on the whole domain, plus the pull towards the
/// blended fine solution when `fine_blend` is present.
pub fn coarse_loss_spec(
    sets: &SampleSets,
    problem: &PoissonProblem,
    fine_blend: Option<&[f64]>,
    weights: &LossWeights,
) -> Result<LossSpec> {
    weights.validate()?;
    if sets.interior.is_empty() {
        return Err(Error::Loss("coarse level has no interior points".into()));
    }
    let mut terms = pde_terms(sets, problem, weights)?;
    if let Some(blend) = fine_blend {
        if blend.len() != sets.interior.len() {
            return Err(Error::Loss(format!(
                "{} blend values for {} coarse points",
                blend.len(),
                sets.interior.len()
            )));
        }
        terms.push(LossTerm::new(
            TERM_FINE,
            Operator::Value,
            weights.lambda_f,
            sets.interior.clone(),
            blend.to_vec(),
        ));
    }
    Ok(LossSpec::new(terms))
}

/// Interface target: the neighbour trace, blended with the coarse trace
/// when one is given.
pub fn update_interface_targets(neighbor: f64, coarse: Option<f64>, lambda_c: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&lambda_c) {
        return Err(Error::Loss(format!("lambda_c must lie in [0, 1], got {lambda_c}")));
    }
    Ok(match coarse {
        None => neighbor,
        Some(c) => lambda_c * neighbor + (1.0 - lambda_c) * c,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "one-level")]
    OneLevel,
    #[serde(rename = "two-level")]
    TwoLevel,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::OneLevel => "one-level",
            Mode::TwoLevel => "two-level",
        }
    }
}

/// Parameters of the coupling schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub lambda_f_value: f64,
    pub lambda_c_base: f64,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule {
            lambda_f_value: 0.5,
            lambda_c_base: 0.9,
        }
    }
}

/// `(λ_f, λ_c)` for the 0-based outer iteration `iteration`.
///
/// Two-level: `λ_c = base^I`, `λ_f = 0` at `I = 0` (no fine solution yet),
/// the fixed value afterwards. One-level: `(0, 1)`.
pub fn schedule_weights(iteration: usize, mode: Mode, schedule: &Schedule) -> (f64, f64) {
    match mode {
        Mode::OneLevel => (0.0, 1.0),
        Mode::TwoLevel => {
            let lambda_f = if iteration == 0 { 0.0 } else { schedule.lambda_f_value };
            (lambda_f, schedule.lambda_c_base.powi(iteration as i32))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Rect;
    use crate::neuralnet::{init_network, term_losses, Activation, Network};
    use crate::sampling::Owner;

    fn sets(interior: Vec<Point>, boundary: Vec<Point>, interface: Vec<Point>) -> SampleSets {
        SampleSets {
            owner: Owner::Subdomain(0),
            rect: Rect::unit(),
            interior,
            outer_boundary: boundary,
            interface,
        }
    }

    fn targets(pts: &[Point], values: Vec<f64>) -> InterfaceTargets {
        InterfaceTargets {
            subdomain: 0,
            points: pts.to_vec(),
            values,
        }
    }

    /// Network with all weights zero and output bias `b`: `u ≡ b`, `Δu ≡ 0`.
    fn constant(b: f64) -> Network {
        let mut net = init_network(&[2, 4, 1], Activation::Tanh, 0).unwrap();
        for l in net.layers_mut() {
            l.weights.fill(0.0);
        }
        net.layers_mut()[1].biases[0] = b;
        net
    }

    #[test]
    fn residual_term_squares_the_residual() {
        // Δu = 0 for the constant network; the target f = -3 gives residual 3.
        let p = PoissonProblem::on_unit_square(1.0, 1.0).unwrap();
        let mut spec = local_loss_spec(
            &sets(vec![[0.5, 0.5]], vec![], vec![]),
            &p,
            &targets(&[], vec![]),
            &LossWeights::default(),
        )
        .unwrap();
        spec.terms[0].targets[0] = -3.0;
        let l = term_losses(&constant(0.0), &spec).unwrap();
        assert_eq!(l, vec![9.0, 0.0, 0.0]);
    }

    #[test]
    fn exact_data_gives_zero_loss() {
        let p = PoissonProblem::on_unit_square(1.0, 3.0).unwrap();
        let interior: Vec<Point> = (1..20).map(|k| [k as f64 / 20.0, 1.0 - k as f64 / 25.0]).collect();
        let boundary: Vec<Point> = (0..10).map(|k| [0.0, k as f64 / 10.0]).chain([[0.3, 1.0], [1.0, 0.4]]).collect();
        let interface: Vec<Point> = (0..8).map(|k| [0.575, k as f64 / 8.0]).collect();
        let s = sets(interior, boundary, interface);
        let exact: Vec<f64> = s.interface.iter().map(|&x| p.exact_solution(x)).collect();
        let t = targets(&s.interface, exact);
        let spec = local_loss_spec(&s, &p, &t, &LossWeights::default()).unwrap();
        let l = spec
            .term_losses_of(|op, x| match op {
                Operator::Value => p.exact_solution(x),
                Operator::Laplacian => p.forcing(x),
            })
            .unwrap();
        assert!(l.iter().all(|v| v.abs() <= 1e-20), "{l:?}");
    }

    #[test]
    fn interface_weight_is_linear_and_isolated() {
        let p = PoissonProblem::on_unit_square(1.0, 1.0).unwrap();
        let s = sets(vec![[0.3, 0.4]], vec![[0.0, 0.2]], vec![[0.575, 0.1], [0.575, 0.3]]);
        let t = targets(&s.interface, vec![0.7, -0.2]);
        let net = init_network(&[2, 5, 1], Activation::Tanh, 4).unwrap();
        let w1 = LossWeights::default();
        let w2 = LossWeights {
            lambda_interface: 2.0,
            ..w1
        };
        let a = term_losses(&net, &local_loss_spec(&s, &p, &t, &w1).unwrap()).unwrap();
        let b = term_losses(&net, &local_loss_spec(&s, &p, &t, &w2).unwrap()).unwrap();
        assert_eq!(a[0], b[0]);
        assert_eq!(a[1], b[1]);
        assert!((b[2] - 2.0 * a[2]).abs() <= 1e-15 * b[2]);

        let w0 = LossWeights {
            lambda_interface: 0.0,
            ..w1
        };
        let c = term_losses(&net, &local_loss_spec(&s, &p, &t, &w0).unwrap()).unwrap();
        assert_eq!(c[2], 0.0);
    }

    #[test]
    fn local_spec_errors() {
        let p = PoissonProblem::on_unit_square(1.0, 1.0).unwrap();
        let s = sets(vec![[0.3, 0.4]], vec![], vec![[0.575, 0.1]]);
        let w = LossWeights::default();
        assert!(local_loss_spec(&s, &p, &targets(&[], vec![]), &w).is_err());
        let empty = sets(vec![], vec![], vec![]);
        assert!(local_loss_spec(&empty, &p, &targets(&[], vec![]), &w).is_err());
    }

    #[test]
    fn coarse_spec_fine_term() {
        let p = PoissonProblem::on_unit_square(1.0, 1.0).unwrap();
        let mut s = sets(vec![[0.5, 0.5]], vec![], vec![]);
        s.owner = Owner::Coarse;
        let w = LossWeights {
            lambda_f: 1.0,
            ..LossWeights::default()
        };
        let without = coarse_loss_spec(&s, &p, None, &w).unwrap();
        assert_eq!(without.terms.len(), 2);
        assert!(without.term(TERM_FINE).is_none());

        let with = coarse_loss_spec(&s, &p, Some(&[0.5]), &w).unwrap();
        let l = term_losses(&constant(1.0), &with).unwrap();
        assert_eq!(l[2], 0.25);
        let matched = coarse_loss_spec(&s, &p, Some(&[1.0]), &w).unwrap();
        assert_eq!(term_losses(&constant(1.0), &matched).unwrap()[2], 0.0);
        assert!(coarse_loss_spec(&s, &p, Some(&[1.0, 2.0]), &w).is_err());
    }

    #[test]
    fn interface_target_rule() {
        assert!((update_interface_targets(2.0, Some(1.0), 0.9).unwrap() - 1.9).abs() < 1e-15);
        assert_eq!(update_interface_targets(2.0, Some(1.0), 1.0).unwrap(), 2.0);
        assert_eq!(update_interface_targets(2.0, Some(1.0), 0.0).unwrap(), 1.0);
        assert_eq!(update_interface_targets(2.0, None, 0.3).unwrap(), 2.0);
        assert!(update_interface_targets(2.0, Some(1.0), 1.5).is_err());
        assert!(update_interface_targets(2.0, Some(1.0), -0.1).is_err());
    }

    #[test]
    fn schedule_values() {
        let s = Schedule::default();
        assert_eq!(schedule_weights(0, Mode::TwoLevel, &s), (0.0, 1.0));
        assert_eq!(schedule_weights(1, Mode::TwoLevel, &s), (0.5, 0.9));
        let (f, c) = schedule_weights(10, Mode::TwoLevel, &s);
        assert_eq!(f, 0.5);
        assert!((c - 0.348_678_440_1).abs() < 1e-10);
        assert_eq!(schedule_weights(7, Mode::OneLevel, &s), (0.0, 1.0));
    }
}
