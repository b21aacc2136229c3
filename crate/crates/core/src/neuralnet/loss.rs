use super::{backward, forward, Channels, Gradient, Network, Workspace, CHUNK};
use crate::error::{Error, Result};
use crate::geometry::Point;

/// What a loss term compares against its targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Operator {
    /// `u(x)`
    Value,
    /// `Δu(x)`
    Laplacian,
}

impl Operator {
    fn channels(self) -> Channels {
        match self {
            Operator::Value => Channels::Value,
            Operator::Laplacian => Channels::Second,
        }
    }
}

/// `weight · mean_i (op[u](x_i) − target_i)²`. A term without points
/// contributes nothing.
#[derive(Debug, Clone, PartialEq)]
pub struct LossTerm {
    pub name: String,
    pub operator: Operator,
    pub weight: f64,
    pub points: Vec<Point>,
    pub targets: Vec<f64>,
}

impl LossTerm {
    pub fn new(
        name: impl Into<String>,
        operator: Operator,
        weight: f64,
        points: Vec<Point>,
        targets: Vec<f64>,
    ) -> Self {
        LossTerm {
            name: name.into(),
            operator,
            weight,
            points,
            targets,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LossSpec {
    pub terms: Vec<LossTerm>,
}

impl LossSpec {
    pub fn new(terms: Vec<LossTerm>) -> Self {
        LossSpec { terms }
    }

    pub fn term(&self, name: &str) -> Option<&LossTerm> {
        self.terms.iter().find(|t| t.name == name)
    }

    /// Per-term loss of an arbitrary field given as `(operator, point) ↦ value`.
    pub fn term_losses_of<F: Fn(Operator, Point) -> f64>(&self, field: F) -> Result<Vec<f64>> {
        self.validate()?;
        Ok(self
            .terms
            .iter()
            .map(|t| {
                if t.points.is_empty() {
                    return 0.0;
                }
                let sum: f64 = t
                    .points
                    .iter()
                    .zip(&t.targets)
                    .map(|(&p, &y)| (field(t.operator, p) - y).powi(2))
                    .sum();
                t.weight / t.points.len() as f64 * sum
            })
            .collect())
    }

    fn validate(&self) -> Result<()> {
        if self.terms.is_empty() {
            return Err(Error::Loss("loss specification has no terms".into()));
        }
        for t in &self.terms {
            if t.points.len() != t.targets.len() {
                return Err(Error::Loss(format!(
                    "term `{}`: {} points but {} targets",
                    t.name,
                    t.points.len(),
                    t.targets.len()
                )));
            }
            if !(t.weight >= 0.0 && t.weight.is_finite()) {
                return Err(Error::Loss(format!(
                    "term `{}`: invalid weight {}",
                    t.name, t.weight
                )));
            }
        }
        Ok(())
    }
}

fn output_of(op: Operator, out: &[f64], n: usize, q: usize) -> f64 {
    match op {
        Operator::Value => out[q],
        Operator::Laplacian => out[3 * n + q] + out[4 * n + q],
    }
}

fn evaluate(net: &Network, spec: &LossSpec, mut grad: Option<&mut Gradient>) -> Result<Vec<f64>> {
    spec.validate()?;
    net.check_finite()?;
    let mut ws = Workspace::new(net);
    let mut residuals = Vec::with_capacity(CHUNK);
    let mut per_term = Vec::with_capacity(spec.terms.len());
    for term in &spec.terms {
        let count = term.points.len();
        if count == 0 {
            per_term.push(0.0);
            continue;
        }
        let scale = term.weight / count as f64;
        let mut sum = 0.0;
        for (chunk, targets) in term.points.chunks(CHUNK).zip(term.targets.chunks(CHUNK)) {
            let n = chunk.len();
            forward(net, chunk, term.operator.channels(), &mut ws);
            let out = ws.output();
            residuals.clear();
            residuals.extend((0..n).map(|q| output_of(term.operator, out, n, q) - targets[q]));
            sum += residuals.iter().map(|r| r * r).sum::<f64>();
            if let Some(g) = grad.as_deref_mut() {
                let adj = ws.output_adjoint();
                adj.fill(0.0);
                for (q, r) in residuals.iter().enumerate() {
                    let a = 2.0 * scale * r;
                    match term.operator {
                        Operator::Value => adj[q] = a,
                        Operator::Laplacian => {
                            adj[3 * n + q] = a;
                            adj[4 * n + q] = a;
                        }
                    }
                }
                backward(net, &mut ws, g);
            }
        }
        per_term.push(scale * sum);
    }
    Ok(per_term)
}

/// Loss value and its exact gradient with respect to all parameters.
pub fn loss_gradient(net: &Network, spec: &LossSpec) -> Result<(f64, Gradient)> {
    let mut grad = Gradient::zeros_like(net);
    let terms = evaluate(net, spec, Some(&mut grad))?;
    Ok((terms.iter().sum(), grad))
}

pub fn loss_value(net: &Network, spec: &LossSpec) -> Result<f64> {
    Ok(term_losses(net, spec)?.iter().sum())
}

/// Weighted contribution of each term, in spec order.
pub fn term_losses(net: &Network, spec: &LossSpec) -> Result<Vec<f64>> {
    evaluate(net, spec, None)
}
