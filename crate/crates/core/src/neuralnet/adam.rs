use serde::{Deserialize, Serialize};

use super::{loss_gradient, loss_value, zero_layers, Gradient, Layer, LossSpec, Network};
use crate::error::{Error, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Learning-rate schedule: `base_rate · decay_factor^⌊step / decay_interval⌋`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub base_rate: f64,
    pub decay_factor: f64,
    pub decay_interval: u64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            base_rate: 2e-4,
            decay_factor: 0.999,
            decay_interval: 100,
        }
    }
}

impl AdamConfig {
    /// Rate used by the update that follows `steps_taken` earlier updates.
    pub fn rate_at(&self, steps_taken: u64) -> f64 {
        let k = steps_taken / self.decay_interval.max(1);
        self.base_rate * self.decay_factor.powi(k as i32)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub config: AdamConfig,
    pub first_moment: Vec<Layer>,
    pub second_moment: Vec<Layer>,
    pub step_count: u64,
}

impl OptimizerState {
    pub fn new(net: &Network, config: AdamConfig) -> Self {
        OptimizerState {
            config,
            first_moment: zero_layers(net.layer_sizes()),
            second_moment: zero_layers(net.layer_sizes()),
            step_count: 0,
        }
    }

    fn matches(&self, net: &Network) -> bool {
        let same = |a: &[Layer]| {
            a.len() == net.layers.len()
                && a.iter().zip(&net.layers).all(|(m, l)| {
                    m.weights.dim() == l.weights.dim() && m.biases.len() == l.biases.len()
                })
        };
        same(&self.first_moment) && same(&self.second_moment)
    }
}

pub fn adam_step(net: &mut Network, state: &mut OptimizerState, grad: &Gradient) -> Result<()> {
    let grad_ok = grad.layers.len() == net.layers.len()
        && grad.layers.iter().zip(&net.layers).all(|(g, l)| {
            g.weights.dim() == l.weights.dim() && g.biases.len() == l.biases.len()
        });
    if !grad_ok || !state.matches(net) {
        return Err(Error::Shape(
            "gradient or optimizer moments do not match the network".into(),
        ));
    }
    let rate = state.config.rate_at(state.step_count);
    state.step_count += 1;
    let t = state.step_count as i32;
    let c1 = 1.0 - BETA1.powi(t);
    let c2 = 1.0 - BETA2.powi(t);

    let update = |theta: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
        *m = BETA1 * *m + (1.0 - BETA1) * g;
        *v = BETA2 * *v + (1.0 - BETA2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *theta -= rate * m_hat / (v_hat.sqrt() + EPSILON);
    };

    for (((layer, g), m), v) in net
        .layers
        .iter_mut()
        .zip(&grad.layers)
        .zip(&mut state.first_moment)
        .zip(&mut state.second_moment)
    {
        for (((w, &gw), mw), vw) in layer
            .weights
            .iter_mut()
            .zip(g.weights.iter())
            .zip(m.weights.iter_mut())
            .zip(v.weights.iter_mut())
        {
            update(w, gw, mw, vw);
        }
        for (((b, &gb), mb), vb) in layer
            .biases
            .iter_mut()
            .zip(g.biases.iter())
            .zip(m.biases.iter_mut())
            .zip(v.biases.iter_mut())
        {
            update(b, gb, mb, vb);
        }
    }
    Ok(())
}

/// Full-batch training for a fixed number of epochs. Returns the loss seen
/// by the last update (or the current loss when `epochs == 0`).
pub fn train(
    net: &mut Network,
    state: &mut OptimizerState,
    spec: &LossSpec,
    epochs: usize,
) -> Result<f64> {
    if epochs == 0 {
        return loss_value(net, spec);
    }
    let mut last = f64::NAN;
    for epoch in 0..epochs {
        let (loss, grad) = loss_gradient(net, spec)?;
        if !loss.is_finite() {
            return Err(Error::Diverged {
                network: "network".into(),
                epoch,
            });
        }
        adam_step(net, state, &grad)?;
        last = loss;
    }
    Ok(last)
}
