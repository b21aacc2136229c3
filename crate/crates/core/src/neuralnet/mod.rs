//! Dense feed-forward networks `R² → R` with exact input derivatives.
//!
//! Points are pushed through the network in chunks. Each chunk carries up to
//! five channels per neuron: the value and its derivatives `∂x`, `∂y`,
//! `∂xx`, `∂yy`, propagated forward with the chain rule. The parameter
//! gradient of a loss is obtained by a reverse sweep through those same
//! channels, so terms involving the Laplacian are differentiated exactly.

mod adam;
mod checkpoint;
mod loss;

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2};
use rand::distributions::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

pub use adam::{adam_step, train, AdamConfig, OptimizerState};
pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC};
pub use loss::{loss_gradient, loss_value, term_losses, LossSpec, LossTerm, Operator};

use crate::error::{Error, Result};
use crate::geometry::{Point, ScalarField};
use crate::sampling::rng_from;

/// Points processed per forward/backward block.
const CHUNK: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Sin,
}

impl Activation {
    pub fn id(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Sin => "sin",
        }
    }

    pub fn from_id(id: &str) -> Option<Self> {
        match id {
            "tanh" => Some(Activation::Tanh),
            "sin" => Some(Activation::Sin),
            _ => None,
        }
    }

    /// `(σ, σ', σ'', σ''')` at `z`.
    #[inline]
    fn derivatives(self, z: f64) -> [f64; 4] {
        match self {
            Activation::Tanh => {
                let t = z.tanh();
                let d1 = 1.0 - t * t;
                let d2 = -2.0 * t * d1;
                let d3 = d1 * (6.0 * t * t - 2.0);
                [t, d1, d2, d3]
            }
            Activation::Sin => {
                let (s, c) = z.sin_cos();
                [s, c, -s, -c]
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `(out, in)`, row-major.
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
}

impl Layer {
    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Layer {
            weights: Array2::zeros((fan_out, fan_in)),
            biases: Array1::zeros(fan_out),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layer_sizes: Vec<usize>,
    activation: Activation,
    layers: Vec<Layer>,
}

/// Gradient of a scalar with respect to every parameter, shaped like the
/// network's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub layers: Vec<Layer>,
}

impl Gradient {
    pub fn zeros_like(net: &Network) -> Self {
        Gradient {
            layers: zero_layers(&net.layer_sizes),
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        flatten(&self.layers)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalTriple {
    pub value: f64,
    pub gradient: [f64; 2],
    pub laplacian: f64,
}

fn zero_layers(sizes: &[usize]) -> Vec<Layer> {
    sizes.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect()
}

fn flatten(layers: &[Layer]) -> Vec<f64> {
    let mut out = Vec::new();
    for l in layers {
        out.extend(l.weights.iter());
        out.extend(l.biases.iter());
    }
    out
}

fn validate_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 2 {
        return Err(Error::Network(format!(
            "need at least input and output sizes, got {sizes:?}"
        )));
    }
    if sizes[0] != 2 || sizes[sizes.len() - 1] != 1 {
        return Err(Error::Network(format!(
            "layer sizes must start with 2 and end with 1, got {sizes:?}"
        )));
    }
    if sizes.contains(&0) {
        return Err(Error::Network(format!("zero-width layer in {sizes:?}")));
    }
    Ok(())
}

/// Glorot-uniform weights, zero biases.
pub fn init_network(layer_sizes: &[usize], activation: Activation, seed: u64) -> Result<Network> {
    validate_sizes(layer_sizes)?;
    let mut rng = rng_from(seed);
    let layers = layer_sizes
        .windows(2)
        .map(|w| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound);
            Layer {
                weights: Array2::from_shape_fn((fan_out, fan_in), |_| dist.sample(&mut rng)),
                biases: Array1::zeros(fan_out),
            }
        })
        .collect();
    Ok(Network {
        layer_sizes: layer_sizes.to_vec(),
        activation,
        layers,
    })
}

impl Network {
    /// Builds a network from explicit layers; shapes are checked.
    pub fn from_layers(activation: Activation, layers: Vec<Layer>) -> Result<Self> {
        let mut sizes = Vec::with_capacity(layers.len() + 1);
        for (k, l) in layers.iter().enumerate() {
            let (out, inp) = l.weights.dim();
            if l.biases.len() != out {
                return Err(Error::Network(format!(
                    "layer {k}: {} biases for {out} outputs",
                    l.biases.len()
                )));
            }
            match sizes.last() {
                None => sizes.push(inp),
                Some(&prev) if prev != inp => {
                    return Err(Error::Network(format!(
                        "layer {k} expects {inp} inputs, previous layer gives {prev}"
                    )))
                }
                Some(_) => {}
            }
            sizes.push(out);
        }
        validate_sizes(&sizes)?;
        Ok(Network {
            layer_sizes: sizes,
            activation,
            layers,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    /// Parameters in checkpoint order: per layer, weights row-major then
    /// biases.
    pub fn to_flat(&self) -> Vec<f64> {
        flatten(&self.layers)
    }

    pub fn set_flat(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::Shape(format!(
                "{} values for {} parameters",
                params.len(),
                self.param_count()
            )));
        }
        let mut it = params.iter().copied();
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|w| *w = it.next().unwrap());
            l.biases.iter_mut().for_each(|b| *b = it.next().unwrap());
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.biases.iter()).all(|v| v.is_finite()))
    }

    fn check_finite(&self) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::Network("non-finite parameters".into()))
        }
    }

    /// Value, gradient and Laplacian at one point.
    pub fn evaluate(&self, p: Point) -> Result<EvalTriple> {
        Ok(self.evaluate_many(&[p])?[0])
    }

    pub fn evaluate_many(&self, points: &[Point]) -> Result<Vec<EvalTriple>> {
        self.check_finite()?;
        let mut out = Vec::with_capacity(points.len());
        let mut ws = Workspace::new(self);
        for chunk in points.chunks(CHUNK) {
            forward(self, chunk, Channels::Second, &mut ws);
            let z = ws.output();
            let n = chunk.len();
            out.extend((0..n).map(|q| EvalTriple {
                value: z[q],
                gradient: [z[n + q], z[2 * n + q]],
                laplacian: z[3 * n + q] + z[4 * n + q],
            }));
        }
        Ok(out)
    }

    /// Network values only.
    pub fn values(&self, points: &[Point]) -> Vec<f64> {
        let mut out = Vec::with_capacity(points.len());
        let mut ws = Workspace::new(self);
        for chunk in points.chunks(CHUNK) {
            forward(self, chunk, Channels::Value, &mut ws);
            out.extend_from_slice(ws.output());
        }
        out
    }
}

impl ScalarField for Network {
    fn value_at(&self, p: Point) -> f64 {
        self.values(&[p])[0]
    }

    fn values_at(&self, points: &[Point]) -> Vec<f64> {
        self.values(points)
    }
}

/// Which derivative channels travel with the values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Channels {
    /// Value only.
    Value,
    /// Value, `∂x`, `∂y`, `∂xx`, `∂yy`.
    Second,
}

impl Channels {
    fn count(self) -> usize {
        match self {
            Channels::Value => 1,
            Channels::Second => 5,
        }
    }
}

/// Buffers for one chunk of at most `CHUNK` points, reused across chunks.
/// Only the first `channels * n` columns of each buffer are live.
pub(crate) struct Workspace {
    n: usize,
    channels: Channels,
    /// Input to each layer, `(fan_in, 5 * CHUNK)`; the last entry feeds the
    /// output layer.
    inputs: Vec<Array2<f64>>,
    /// Pre-activation of each hidden layer.
    pre: Vec<Array2<f64>>,
    /// `σ'`, `σ''`, `σ'''` at the pre-activation values, `(out, CHUNK)`.
    slopes: Vec<[Array2<f64>; 3]>,
    output: Array2<f64>,
    /// Adjoints of the pre-activations; the last entry is the output adjoint.
    zbar: Vec<Array2<f64>>,
    /// Adjoint of a hidden layer's activations.
    abar: Vec<Array2<f64>>,
}

impl Workspace {
    pub(crate) fn new(net: &Network) -> Self {
        let cols = 5 * CHUNK;
        let sizes = &net.layer_sizes;
        let hidden = &sizes[1..sizes.len() - 1];
        let buf = |rows: usize, cols: usize| Array2::<f64>::zeros((rows, cols));
        Workspace {
            n: 0,
            channels: Channels::Value,
            inputs: sizes[..sizes.len() - 1].iter().map(|&w| buf(w, cols)).collect(),
            pre: hidden.iter().map(|&w| buf(w, cols)).collect(),
            slopes: hidden
                .iter()
                .map(|&w| [buf(w, CHUNK), buf(w, CHUNK), buf(w, CHUNK)])
                .collect(),
            output: buf(1, cols),
            zbar: sizes[1..].iter().map(|&w| buf(w, cols)).collect(),
            abar: hidden.iter().map(|&w| buf(w, cols)).collect(),
        }
    }

    fn live(&self) -> usize {
        self.channels.count() * self.n
    }

    /// Output channels of the last forward pass, `channels * n` entries.
    pub(crate) fn output(&self) -> &[f64] {
        &self.output.as_slice().unwrap()[..self.live()]
    }

    /// Adjoint of the output channels; callers fill every live entry
    /// before [`backward`].
    pub(crate) fn output_adjoint(&mut self) -> &mut [f64] {
        let live = self.live();
        let last = self.zbar.last_mut().unwrap();
        &mut last.as_slice_mut().unwrap()[..live]
    }
}

/// Pushes up to `CHUNK` points through the network, filling `ws`.
pub(crate) fn forward(net: &Network, points: &[Point], channels: Channels, ws: &mut Workspace) {
    let n = points.len();
    assert!(n <= CHUNK, "chunk of {n} points exceeds {CHUNK}");
    let c = channels.count();
    ws.n = n;
    ws.channels = channels;
    let live = c * n;
    {
        let h = &mut ws.inputs[0];
        for (q, p) in points.iter().enumerate() {
            h[[0, q]] = p[0];
            h[[1, q]] = p[1];
        }
        if channels == Channels::Second {
            // ∂x of (x, y) is (1, 0), ∂y is (0, 1), second derivatives vanish.
            h.slice_mut(s![.., n..live]).fill(0.0);
            h.slice_mut(s![0, n..2 * n]).fill(1.0);
            h.slice_mut(s![1, 2 * n..3 * n]).fill(1.0);
        }
    }

    let hidden = net.layers.len() - 1;
    let activation = net.activation;
    for (k, layer) in net.layers[..hidden].iter().enumerate() {
        let (before, after) = ws.inputs.split_at_mut(k + 1);
        let h = before[k].slice(s![.., ..live]);
        let z = &mut ws.pre[k];
        general_mat_mul(1.0, &layer.weights, &h, 0.0, &mut z.slice_mut(s![.., ..live]));
        let a = &mut after[0];
        let [d1, d2, d3] = &mut ws.slopes[k];
        for j in 0..layer.weights.nrows() {
            let b = layer.biases[j];
            let zr = &mut z.row_mut(j).into_slice().unwrap()[..live];
            let ar = &mut a.row_mut(j).into_slice().unwrap()[..live];
            let r1 = &mut d1.row_mut(j).into_slice().unwrap()[..n];
            let r2 = &mut d2.row_mut(j).into_slice().unwrap()[..n];
            let r3 = &mut d3.row_mut(j).into_slice().unwrap()[..n];
            let (zv, zrest) = zr.split_at_mut(n);
            let (av, arest) = ar.split_at_mut(n);
            for q in 0..n {
                zv[q] += b;
                let [s0, s1, s2, s3] = activation.derivatives(zv[q]);
                av[q] = s0;
                r1[q] = s1;
                r2[q] = s2;
                r3[q] = s3;
            }
            if channels == Channels::Second {
                let (zx, zrest) = zrest.split_at(n);
                let (zy, zrest) = zrest.split_at(n);
                let (zxx, zyy) = zrest.split_at(n);
                let (ax, arest) = arest.split_at_mut(n);
                let (ay, arest) = arest.split_at_mut(n);
                let (axx, ayy) = arest.split_at_mut(n);
                for q in 0..n {
                    let (s1, s2) = (r1[q], r2[q]);
                    ax[q] = s1 * zx[q];
                    ay[q] = s1 * zy[q];
                    axx[q] = s2 * zx[q] * zx[q] + s1 * zxx[q];
                    ayy[q] = s2 * zy[q] * zy[q] + s1 * zyy[q];
                }
            }
        }
    }

    let last = &net.layers[hidden];
    let h = ws.inputs[hidden].slice(s![.., ..live]);
    general_mat_mul(1.0, &last.weights, &h, 0.0, &mut ws.output.slice_mut(s![.., ..live]));
    let b = last.biases[0];
    ws.output.slice_mut(s![0, ..n]).iter_mut().for_each(|v| *v += b);
}

/// Reverse sweep: accumulates `∂L/∂θ` into `grad` from the output adjoint
/// stored in `ws` by the caller.
pub(crate) fn backward(net: &Network, ws: &mut Workspace, grad: &mut Gradient) {
    let n = ws.n;
    let live = ws.live();
    let second = ws.channels == Channels::Second;
    let hidden = net.layers.len() - 1;

    for l in (0..=hidden).rev() {
        let layer = &net.layers[l];
        let g = &mut grad.layers[l];
        let (lower, upper) = ws.zbar.split_at_mut(l);
        let zbar = upper[0].slice(s![.., ..live]);
        let input = ws.inputs[l].slice(s![.., ..live]);
        general_mat_mul(1.0, &zbar, &input.t(), 1.0, &mut g.weights);
        for (j, gb) in g.biases.iter_mut().enumerate() {
            *gb += zbar.row(j).slice(s![..n]).sum();
        }
        if l == 0 {
            break;
        }
        // Through the activation of hidden layer l - 1.
        let k = l - 1;
        let abar = &mut ws.abar[k];
        general_mat_mul(1.0, &layer.weights.t(), &zbar, 0.0, &mut abar.slice_mut(s![.., ..live]));
        let z = &ws.pre[k];
        let [d1, d2, d3] = &ws.slopes[k];
        let out = &mut lower[k];
        for j in 0..abar.nrows() {
            let ar = &abar.row(j).to_slice().unwrap()[..live];
            let zr = &z.row(j).to_slice().unwrap()[..live];
            let s1 = &d1.row(j).to_slice().unwrap()[..n];
            let s2 = &d2.row(j).to_slice().unwrap()[..n];
            let s3 = &d3.row(j).to_slice().unwrap()[..n];
            let or = &mut out.row_mut(j).into_slice().unwrap()[..live];
            if !second {
                for q in 0..n {
                    or[q] = ar[q] * s1[q];
                }
                continue;
            }
            let (ov, orest) = or.split_at_mut(n);
            let (ox, orest) = orest.split_at_mut(n);
            let (oy, orest) = orest.split_at_mut(n);
            let (oxx, oyy) = orest.split_at_mut(n);
            let (av, arest) = ar.split_at(n);
            let (ax, arest) = arest.split_at(n);
            let (ay, arest) = arest.split_at(n);
            let (axx, ayy) = arest.split_at(n);
            let (_, zrest) = zr.split_at(n);
            let (zx, zrest) = zrest.split_at(n);
            let (zy, zrest) = zrest.split_at(n);
            let (zxx, zyy) = zrest.split_at(n);
            for q in 0..n {
                let (t1, t2, t3) = (s1[q], s2[q], s3[q]);
                let (x, y) = (zx[q], zy[q]);
                ov[q] = av[q] * t1
                    + ax[q] * t2 * x
                    + ay[q] * t2 * y
                    + axx[q] * (t3 * x * x + t2 * zxx[q])
                    + ayy[q] * (t3 * y * y + t2 * zyy[q]);
                ox[q] = ax[q] * t1 + 2.0 * axx[q] * t2 * x;
                oy[q] = ay[q] * t1 + 2.0 * ayy[q] * t2 * y;
                oxx[q] = axx[q] * t1;
                oyy[q] = ayy[q] * t1;
            }
        }
    }
}
