//! Built-in oracle checks: finite-difference derivatives of networks and
//! losses, partition-of-unity invariants, and the manufactured forcing.

use rand::Rng;

use crate::geometry::{
    blend_many, make_partition_of_unity, make_regular_decomposition, Edge, Point, Rect,
};
use crate::neuralnet::{
    init_network, loss_gradient, loss_value, Activation, LossSpec, LossTerm, Network, Operator,
};
use crate::problems::PoissonProblem;
use crate::sampling::rng_from;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, worst: f64, tol: f64) -> Check {
    Check {
        name,
        passed: worst <= tol,
        detail: format!("worst {worst:.3e}, tolerance {tol:.0e}"),
    }
}

fn random_net(rng: &mut impl Rng) -> Network {
    let mut net = init_network(&[2, 10, 10, 1], Activation::Tanh, rng.gen()).expect("valid sizes");
    for l in net.layers_mut() {
        l.biases.iter_mut().for_each(|b| *b = rng.gen_range(-0.5..0.5));
    }
    net
}

fn unit_point(rng: &mut impl Rng) -> Point {
    [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]
}

/// Relative error, or absolute error below `floor`.
fn mixed_err(a: f64, b: f64, floor: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale > floor {
        (a - b).abs() / scale
    } else {
        (a - b).abs() / floor
    }
}

fn laplacian_check() -> Check {
    let mut rng = rng_from(101);
    let h = 1e-4;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let net = random_net(&mut rng);
        let p = unit_point(&mut rng);
        let stencil = [p, [p[0] + h, p[1]], [p[0] - h, p[1]], [p[0], p[1] + h], [p[0], p[1] - h]];
        let v = net.values(&stencil);
        let fd = (v[1] + v[2] + v[3] + v[4] - 4.0 * v[0]) / (h * h);
        let exact = net.evaluate(p).map(|e| e.laplacian).unwrap_or(f64::NAN);
        worst = worst.max(mixed_err(exact, fd, 1e-2));
    }
    check("network Laplacian matches finite differences", worst, 1e-5)
}

fn gradient_check() -> Check {
    let mut rng = rng_from(102);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let net = random_net(&mut rng);
        let mut points = |n: usize| (0..n).map(|_| unit_point(&mut rng)).collect::<Vec<_>>();
        let (interior, boundary) = (points(40), points(15));
        let mut targets = |n: usize| (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect::<Vec<_>>();
        let spec = LossSpec::new(vec![
            LossTerm::new("interior", Operator::Laplacian, 1.0, interior, targets(40)),
            LossTerm::new("boundary", Operator::Value, 0.5, boundary, targets(15)),
        ]);
        let Ok((_, grad)) = loss_gradient(&net, &spec) else {
            return check("loss gradient matches finite differences", f64::INFINITY, 1e-5);
        };
        let analytic = grad.to_flat();
        let theta = net.to_flat();
        for _ in 0..10 {
            let k = rng.gen_range(0..theta.len());
            let h = 1e-6 * (1.0 + theta[k].abs());
            let shifted = |delta: f64| {
                let mut t = theta.clone();
                t[k] += delta;
                let mut n = net.clone();
                n.set_flat(&t).expect("same shape");
                loss_value(&n, &spec).unwrap_or(f64::NAN)
            };
            let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
            worst = worst.max(mixed_err(analytic[k], fd, 1e-3));
        }
    }
    check("loss gradient matches finite differences", worst, 1e-5)
}

fn decompositions() -> Vec<crate::geometry::Decomposition> {
    [(1, 1, 0.3), (2, 2, 0.3), (3, 2, 0.2), (4, 4, 0.3)]
        .iter()
        .map(|&(nx, ny, f)| make_regular_decomposition(Rect::unit(), nx, ny, f).expect("valid grid"))
        .collect()
}

fn pou_sum_check() -> Check {
    let mut rng = rng_from(103);
    let mut worst: f64 = 0.0;
    for d in decompositions() {
        let pou = make_partition_of_unity(&d);
        for _ in 0..10_000 {
            let p = unit_point(&mut rng);
            let sum: f64 = pou.weights(p).iter().map(|(_, w)| w).sum();
            worst = worst.max((sum - 1.0).abs());
        }
    }
    check("partition of unity sums to one", worst, 1e-12)
}

fn pou_interface_check() -> Check {
    let mut rng = rng_from(104);
    let mut worst: f64 = 0.0;
    for d in decompositions() {
        let pou = make_partition_of_unity(&d);
        for s in 0..d.len() {
            for edge in d.interior_edges(s).collect::<Vec<Edge>>() {
                let (a, b) = d.subdomains[s].edge_segment(edge);
                for _ in 0..200 {
                    let t: f64 = rng.gen_range(0.0..=1.0);
                    let p = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                    worst = worst.max(pou.evaluate(s, p).abs());
                }
            }
        }
    }
    check("partition of unity vanishes on interface edges", worst, 0.0)
}

fn blend_check() -> Check {
    let mut rng = rng_from(105);
    let f = |p: Point| (3.0 * p[0]).sin() + p[1] * p[1] - 0.25;
    let mut worst: f64 = 0.0;
    for d in decompositions() {
        let pou = make_partition_of_unity(&d);
        let fields = vec![f; d.len()];
        let pts: Vec<Point> = (0..2_000).map(|_| unit_point(&mut rng)).collect();
        let Ok(blend) = blend_many(&pou, &fields, &pts) else {
            return check("blend reproduces a shared function", f64::INFINITY, 1e-14);
        };
        for (p, v) in pts.iter().zip(blend) {
            worst = worst.max((v - f(*p)).abs());
        }
    }
    check("blend reproduces a shared function", worst, 1e-14)
}

fn forcing_check() -> Check {
    let mut rng = rng_from(106);
    let h = 1e-3;
    let mut worst: f64 = 0.0;
    for (w1, w2) in [(1.0, 1.0), (1.0, 3.0), (1.0, 6.0)] {
        let problem = PoissonProblem::on_unit_square(w1, w2).expect("positive frequencies");
        let u = |x: f64, y: f64| problem.exact_solution([x, y]);
        for _ in 0..100 {
            let [x, y] = unit_point(&mut rng);
            // Fourth-order central differences.
            let d2 = |g: &dyn Fn(f64) -> f64, t: f64| {
                (-g(t + 2.0 * h) + 16.0 * g(t + h) - 30.0 * g(t) + 16.0 * g(t - h) - g(t - 2.0 * h))
                    / (12.0 * h * h)
            };
            let lap = d2(&|t| u(t, y), x) + d2(&|t| u(x, t), y);
            worst = worst.max(mixed_err(problem.forcing([x, y]), lap, 1.0));
        }
    }
    check("forcing equals the Laplacian of the exact solution", worst, 1e-6)
}

/// Runs every check.
pub fn run_checks() -> Vec<Check> {
    vec![
        laplacian_check(),
        gradient_check(),
        pou_sum_check(),
        pou_interface_check(),
        blend_check(),
        forcing_check(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass() {
        for c in run_checks() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
