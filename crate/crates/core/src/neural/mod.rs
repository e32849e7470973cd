//! Fully connected binary classifier with hand-written backpropagation.
//!
//! A model is an ordered list of dense layers. Hidden layers apply a smooth
//! activation, the last layer has a single output squashed by the logistic
//! function. Gradients share the parameter layout, so [`ModelParams`] is
//! used for both.

mod checkpoint;
mod metrics;
mod train;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Classifier};
pub use metrics::{auc, evaluate, Confusion, MetricsReport};
pub use train::{train_steps, BatchStream, SgdSettings, TrainConfig, TrainRun};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FEATURE_COUNT;
use crate::rng::Rng;
use crate::scalar::Scalar;

/// Hidden layer sizes of the default architecture.
pub const DEFAULT_HIDDEN: [usize; 2] = [32, 16];

/// Hidden-layer nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    /// `ln(1 + e^z)`, a smooth ramp.
    #[default]
    Softplus,
    Tanh,
}

impl Activation {
    fn apply<S: Scalar>(self, z: S) -> S {
        match self {
            // max(z, 0) + ln(1 + e^-|z|) avoids overflow for large |z|.
            Activation::Softplus => z.max(S::zero()) + (-z.abs()).exp().ln_1p(),
            Activation::Tanh => z.tanh(),
        }
    }

    fn derivative<S: Scalar>(self, z: S) -> S {
        match self {
            Activation::Softplus => sigmoid(z),
            Activation::Tanh => {
                let t = z.tanh();
                S::one() - t * t
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Softplus => "softplus",
            Activation::Tanh => "tanh",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "softplus" => Some(Activation::Softplus),
            "tanh" => Some(Activation::Tanh),
            _ => None,
        }
    }
}

/// Numerically stable logistic function.
pub fn sigmoid<S: Scalar>(z: S) -> S {
    if z >= S::zero() {
        S::one() / (S::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (S::one() + e)
    }
}

/// One dense layer: `outputs x inputs` row-major weights and a bias per output.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<S> {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<S>,
    pub bias: Vec<S>,
}

impl<S: Scalar> Layer<S> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self { inputs, outputs, weights: vec![S::zero(); inputs * outputs], bias: vec![S::zero(); outputs] }
    }

    pub fn weight(&self, row: usize, col: usize) -> S {
        self.weights[row * self.inputs + col]
    }

    fn same_shape(&self, other: &Self) -> bool {
        self.inputs == other.inputs && self.outputs == other.outputs
    }

    fn values(&self) -> impl Iterator<Item = &S> {
        self.weights.iter().chain(&self.bias)
    }

    fn values_mut(&mut self) -> impl Iterator<Item = &mut S> {
        self.weights.iter_mut().chain(&mut self.bias)
    }
}

/// Parameters of a layered network (or a gradient with the same layout).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<S> {
    pub layers: Vec<Layer<S>>,
    pub activation: Activation,
}

impl<S: Scalar> ModelParams<S> {
    /// All-zero parameters for layer widths `dims` (input first, output last).
    pub fn zeros(dims: &[usize]) -> Result<Self> {
        check_dims(dims)?;
        Ok(Self {
            layers: dims.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect(),
            activation: Activation::default(),
        })
    }

    /// Weights uniform in `±sqrt(6 / (in + out))` per layer, zero biases.
    pub fn init(dims: &[usize], rng: &mut Rng) -> Result<Self> {
        let mut params = Self::zeros(dims)?;
        for layer in &mut params.layers {
            let bound = (6.0 / (layer.inputs + layer.outputs) as f64).sqrt();
            for w in &mut layer.weights {
                *w = S::lit(rng.gen_range(-bound..bound));
            }
        }
        Ok(params)
    }

    /// The default `6 -> 32 -> 16 -> 1` architecture.
    pub fn init_default(rng: &mut Rng) -> Self {
        let mut dims = vec![FEATURE_COUNT];
        dims.extend(DEFAULT_HIDDEN);
        dims.push(1);
        Self::init(&dims, rng).expect("default dimensions are valid")
    }

    pub fn with_activation(mut self, activation: Activation) -> Self {
        self.activation = activation;
        self
    }

    /// Layer widths, input first.
    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.input_dim()];
        dims.extend(self.layers.iter().map(|l| l.outputs));
        dims
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.inputs)
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.layers.len() == other.layers.len()
            && self.layers.iter().zip(&other.layers).all(|(a, b)| a.same_shape(b))
    }

    pub fn zeros_like(&self) -> Self {
        self.map(|_| S::zero())
    }

    /// Flat view over every parameter, layer by layer, weights before biases.
    pub fn values(&self) -> impl Iterator<Item = &S> {
        self.layers.iter().flat_map(Layer::values)
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut S> {
        self.layers.iter_mut().flat_map(Layer::values_mut)
    }

    pub fn map(&self, f: impl Fn(S) -> S) -> Self {
        let mut out = self.clone();
        out.values_mut().for_each(|v| *v = f(*v));
        out
    }

    /// Elementwise combination of two identically shaped structures.
    pub fn zip_with(&self, other: &Self, f: impl Fn(S, S) -> S) -> Result<Self> {
        if !self.same_shape(other) {
            return Err(Error::ShapeMismatch);
        }
        let mut out = self.clone();
        for (a, &b) in out.values_mut().zip(other.values()) {
            *a = f(*a, b);
        }
        Ok(out)
    }

    /// `self + scale * other`.
    pub fn add_scaled(&self, other: &Self, scale: S) -> Result<Self> {
        self.zip_with(other, |a, b| a + scale * b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, factor: S) -> Self {
        self.map(|v| v * factor)
    }

    /// Largest elementwise absolute difference; infinite on shape mismatch.
    pub fn max_abs_diff(&self, other: &Self) -> S {
        if !self.same_shape(other) {
            return S::infinity();
        }
        self.values().zip(other.values()).fold(S::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(|v| v.is_finite())
    }

    /// FNV-1a over the `f64` bit patterns of every parameter.
    pub fn checksum(&self) -> u64 {
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        for v in self.values() {
            for byte in v.as_f64().to_bits().to_le_bytes() {
                hash ^= u64::from(byte);
                hash = hash.wrapping_mul(0x0100_0000_01b3);
            }
        }
        hash
    }

    /// Probability of the positive class for one standardized input.
    pub fn forward(&self, x: &[S]) -> Result<S> {
        forward(self, x)
    }
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 {
        return Err(Error::invalid("a model needs an input width and at least one layer"));
    }
    if dims.contains(&0) {
        return Err(Error::invalid("layer widths must be positive"));
    }
    if *dims.last().unwrap() != 1 {
        return Err(Error::invalid("the output layer must have width 1"));
    }
    Ok(())
}

/// A standardized input with its binary label.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample<S> {
    pub x: Vec<S>,
    pub label: bool,
}

impl<S: Scalar> Sample<S> {
    pub fn new(x: Vec<S>, label: bool) -> Self {
        Self { x, label }
    }

    pub fn target(&self) -> S {
        if self.label {
            S::one()
        } else {
            S::zero()
        }
    }
}

/// Pre-activations of every layer, kept for the backward pass.
struct Trace<S> {
    pre: Vec<Vec<S>>,
    post: Vec<Vec<S>>,
}

fn affine<S: Scalar>(layer: &Layer<S>, input: &[S]) -> Vec<S> {
    (0..layer.outputs)
        .map(|r| {
            let row = &layer.weights[r * layer.inputs..(r + 1) * layer.inputs];
            row.iter().zip(input).fold(layer.bias[r], |acc, (&w, &x)| acc + w * x)
        })
        .collect()
}

fn forward_trace<S: Scalar>(params: &ModelParams<S>, x: &[S]) -> Result<Trace<S>> {
    if params.layers.is_empty() {
        return Err(Error::invalid("model has no layers"));
    }
    if x.len() != params.input_dim() {
        return Err(Error::DimensionMismatch { expected: params.input_dim(), actual: x.len() });
    }
    let last = params.layers.len() - 1;
    let mut pre = Vec::with_capacity(params.layers.len());
    let mut post: Vec<Vec<S>> = Vec::with_capacity(params.layers.len() + 1);
    post.push(x.to_vec());
    for (i, layer) in params.layers.iter().enumerate() {
        let z = affine(layer, post.last().unwrap());
        let a = if i == last {
            z.iter().map(|&v| sigmoid(v)).collect()
        } else {
            z.iter().map(|&v| params.activation.apply(v)).collect()
        };
        pre.push(z);
        post.push(a);
    }
    Ok(Trace { pre, post })
}

/// Output probability of the network for input `x`.
pub fn forward<S: Scalar>(params: &ModelParams<S>, x: &[S]) -> Result<S> {
    let trace = forward_trace(params, x)?;
    Ok(trace.post.last().unwrap()[0])
}

/// Clamp applied to probabilities before taking logarithms.
pub fn loss_epsilon<S: Scalar>() -> S {
    S::lit(1e-12).max(S::epsilon())
}

/// Binary cross-entropy with `p` clamped to `[eps, 1 - eps]`.
pub fn bce_loss<S: Scalar>(p: S, y: bool) -> S {
    let eps = loss_epsilon::<S>();
    let p = p.max(eps).min(S::one() - eps);
    if y {
        -p.ln()
    } else {
        -(S::one() - p).ln()
    }
}

/// Mean loss and mean gradient over a batch, positives weighted by
/// `positive_weight`.
pub fn loss_and_gradient<S: Scalar>(
    params: &ModelParams<S>,
    batch: &[Sample<S>],
    positive_weight: S,
) -> Result<(S, ModelParams<S>)> {
    if batch.is_empty() {
        return Err(Error::Empty("batch"));
    }
    let mut grad = params.zeros_like();
    let mut loss = S::zero();
    let last = params.layers.len() - 1;
    for sample in batch {
        let trace = forward_trace(params, &sample.x)?;
        let p = trace.post[last + 1][0];
        let weight = if sample.label { positive_weight } else { S::one() };
        loss = loss + weight * bce_loss(p, sample.label);

        // dL/dz of the output layer for sigmoid + cross-entropy.
        let mut delta = vec![weight * (p - sample.target())];
        for l in (0..=last).rev() {
            let layer = &params.layers[l];
            let input = &trace.post[l];
            let g = &mut grad.layers[l];
            for (r, &d) in delta.iter().enumerate() {
                g.bias[r] = g.bias[r] + d;
                let row = &mut g.weights[r * layer.inputs..(r + 1) * layer.inputs];
                for (gw, &a) in row.iter_mut().zip(input) {
                    *gw = *gw + d * a;
                }
            }
            if l > 0 {
                let z_prev = &trace.pre[l - 1];
                delta = (0..layer.inputs)
                    .map(|c| {
                        let back = delta
                            .iter()
                            .enumerate()
                            .fold(S::zero(), |acc, (r, &d)| acc + layer.weight(r, c) * d);
                        back * params.activation.derivative(z_prev[c])
                    })
                    .collect();
            }
        }
    }
    let n = S::from_count(batch.len());
    Ok((loss / n, grad.scale(n.recip())))
}

/// Mean gradient of the cross-entropy loss over a batch.
pub fn gradient<S: Scalar>(params: &ModelParams<S>, batch: &[Sample<S>]) -> Result<ModelParams<S>> {
    loss_and_gradient(params, batch, S::one()).map(|(_, g)| g)
}

/// Mean cross-entropy of a batch.
pub fn batch_loss<S: Scalar>(params: &ModelParams<S>, batch: &[Sample<S>]) -> Result<S> {
    if batch.is_empty() {
        return Err(Error::Empty("batch"));
    }
    let mut total = S::zero();
    for s in batch {
        total = total + bce_loss(forward(params, &s.x)?, s.label);
    }
    Ok(total / S::from_count(batch.len()))
}

/// `params - learning_rate * grad`.
pub fn sgd_step<S: Scalar>(params: &ModelParams<S>, grad: &ModelParams<S>, learning_rate: S) -> Result<ModelParams<S>> {
    params.zip_with(grad, |w, g| w - learning_rate * g)
}
