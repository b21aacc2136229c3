//! Error and coupling diagnostics of a Schwarz state.

use crate::error::Result;
use crate::geometry::{blend_many, PartitionOfUnity, Point, ScalarField};
use crate::problems::PoissonProblem;
use crate::schwarz::SchwarzState;

#[derive(Debug, Clone, PartialEq)]
pub struct IterationMetrics {
    pub iteration_index: usize,
    /// Mean squared error of the fine blend on the evaluation grid.
    pub global_mse: f64,
    pub global_rel_l2: f64,
    pub per_subdomain_final_loss: Vec<f64>,
    pub coarse_final_loss: Option<f64>,
    /// Largest `|u_s − blend|` over all interface sample points.
    pub max_interface_jump: f64,
    pub wall_seconds: f64,
}

/// `(mse, relative L2)` of the partition-of-unity blend of `fields`
/// against the exact solution on `grid`.
pub fn blend_errors<M: ScalarField>(
    pou: &PartitionOfUnity,
    fields: &[M],
    problem: &PoissonProblem,
    grid: &[Point],
) -> Result<(f64, f64)> {
    let u = blend_many(pou, fields, grid)?;
    let mut sq_err = 0.0;
    let mut sq_exact = 0.0;
    for (&p, v) in grid.iter().zip(&u) {
        let e = problem.exact_solution(p);
        sq_err += (v - e).powi(2);
        sq_exact += e * e;
    }
    let mse = sq_err / grid.len() as f64;
    let rel = if sq_exact > 0.0 { (sq_err / sq_exact).sqrt() } else { sq_err.sqrt() };
    Ok((mse, rel))
}

/// Largest mismatch between each field and the blend at its own interface
/// points. `interfaces[s]` holds the interface points of subdomain `s`.
pub fn max_interface_jump<M: ScalarField>(
    pou: &PartitionOfUnity,
    fields: &[M],
    interfaces: &[Vec<Point>],
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (field, pts) in fields.iter().zip(interfaces) {
        if pts.is_empty() {
            continue;
        }
        let own = field.values_at(pts);
        let blend = blend_many(pou, fields, pts)?;
        for (a, b) in own.iter().zip(&blend) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(worst)
}

/// Metrics of the current local networks of `state`.
pub fn compute_metrics(state: &SchwarzState, grid: &[Point], wall_seconds: f64) -> Result<IterationMetrics> {
    let nets = state.local_networks();
    let (global_mse, global_rel_l2) = blend_errors(&state.pou, &nets, &state.problem, grid)?;
    let interfaces: Vec<Vec<Point>> = state.fine_sets.iter().map(|s| s.interface.clone()).collect();
    Ok(IterationMetrics {
        iteration_index: state.iteration_index,
        global_mse,
        global_rel_l2,
        per_subdomain_final_loss: state.local_losses.clone(),
        coarse_final_loss: state.coarse_loss,
        max_interface_jump: max_interface_jump(&state.pou, &nets, &interfaces)?,
        wall_seconds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_partition_of_unity, make_regular_decomposition, Rect};
    use crate::sampling::evaluation_grid;

    fn setup(nx: usize, ny: usize) -> (PartitionOfUnity, PoissonProblem, Vec<Point>) {
        let d = make_regular_decomposition(Rect::unit(), nx, ny, 0.3).unwrap();
        let p = PoissonProblem::on_unit_square(1.0, 1.0).unwrap();
        (make_partition_of_unity(&d), p, evaluation_grid(&Rect::unit(), 100, 100).unwrap())
    }

    #[test]
    fn exact_fields_have_zero_error() {
        let (pou, problem, grid) = setup(2, 2);
        let f = |p: Point| problem.exact_solution(p);
        let (mse, rel) = blend_errors(&pou, &[f, f, f, f], &problem, &grid).unwrap();
        assert!(mse < 1e-30 && rel < 1e-15);
    }

    #[test]
    fn zero_field_has_unit_relative_error() {
        let (pou, problem, grid) = setup(2, 2);
        let zero = |_: Point| 0.0;
        let (_, rel) = blend_errors(&pou, &[zero; 4], &problem, &grid).unwrap();
        assert_eq!(rel, 1.0);
    }

    #[test]
    fn shared_field_has_no_interface_jump() {
        let (pou, _, _) = setup(2, 2);
        let f = |p: Point| p[0] * p[1] + 1.0;
        let interfaces = vec![vec![[0.5, 0.2], [0.65, 0.5]]; 4];
        let jump = max_interface_jump(&pou, &[f; 4], &interfaces).unwrap();
        assert!(jump < 1e-15);
    }
}
