//! Personalized federated learning: one-epoch fine-tuning of the global
//! model, Hessian-free Per-FedAvg, and FedALA's adaptive local aggregation.

use std::io::Write;

use rand::seq::index;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::federation::{run_fedavg, run_rounds, Client, FedRun, Schedule};
use crate::neural::{loss_and_gradient, train_steps, BatchStream, Layer, MetricsReport, ModelParams, Sample, TrainConfig};
use crate::rng::{self, Purpose};
use crate::scalar::{self, round_half_up, Scalar};

/// Elementwise blending weights for the top `p` layers, each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlaWeights<S> {
    pub layers: Vec<Layer<S>>,
}

impl<S: Scalar> AlaWeights<S> {
    /// Weights shaped like the top `top_layers` layers of `model`, all equal to `value`.
    pub fn filled(model: &ModelParams<S>, top_layers: usize, value: S) -> Result<Self> {
        let l = model.layer_count();
        if top_layers > l {
            return Err(Error::invalid(format!("top_layers = {top_layers} exceeds layer count {l}")));
        }
        let layers = model.layers[l - top_layers..]
            .iter()
            .map(|layer| Layer {
                inputs: layer.inputs,
                outputs: layer.outputs,
                weights: vec![value; layer.weights.len()],
                bias: vec![value; layer.bias.len()],
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn ones(model: &ModelParams<S>, top_layers: usize) -> Result<Self> {
        Self::filled(model, top_layers, S::one())
    }

    pub fn top_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn values(&self) -> impl Iterator<Item = &S> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias))
    }

    fn values_mut(&mut self) -> impl Iterator<Item = &mut S> {
        self.layers.iter_mut().flat_map(|l| l.weights.iter_mut().chain(&mut l.bias))
    }

    /// Writes `layer,kind,index,weight` rows, layers numbered from the bottom
    /// of the blended block.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "layer,kind,index,weight")?;
        for (l, layer) in self.layers.iter().enumerate() {
            for (i, w) in layer.weights.iter().enumerate() {
                writeln!(out, "{l},weight,{i},{w}")?;
            }
            for (i, b) in layer.bias.iter().enumerate() {
                writeln!(out, "{l},bias,{i},{b}")?;
            }
        }
        Ok(())
    }
}

/// Personalized models and their per-client test metrics.
#[derive(Debug, Clone)]
pub struct PersonalizedOutcome<S> {
    pub method: &'static str,
    pub models: Vec<ModelParams<S>>,
    pub reports: Vec<MetricsReport<S>>,
    /// The federated run that produced the shared model.
    pub federated: FedRun<S>,
}

fn evaluate_each<S: Scalar>(
    method: &'static str,
    clients: &[Client<S>],
    models: Vec<ModelParams<S>>,
    federated: FedRun<S>,
) -> Result<PersonalizedOutcome<S>> {
    let reports = clients.iter().zip(&models).map(|(c, m)| c.evaluate(m)).collect::<Result<Vec<_>>>()?;
    Ok(PersonalizedOutcome { method, models, reports, federated })
}

/// One epoch of local SGD on `global`: every training example is visited
/// exactly once, in seeded mini-batches of the fine-tuning batch size.
pub fn fine_tune<S: Scalar>(global: &ModelParams<S>, client: &Client<S>, config: &TrainConfig) -> Result<ModelParams<S>> {
    let mut stream = BatchStream::new(
        client.train_size(),
        config.fine_tune_batch(),
        rng::client_stream(client.seed(), client.id(), Purpose::FineTune),
    )?;
    let mut settings = config.sgd(stream.batches_per_pass());
    settings.learning_rate = S::lit(config.fine_tune_rate());
    Ok(train_steps(global, client.train_data(), &settings, &mut stream)?.params)
}

fn fine_tune_all<S: Scalar>(
    global: &ModelParams<S>,
    clients: &[Client<S>],
    config: &TrainConfig,
    schedule: Schedule,
) -> Result<Vec<ModelParams<S>>> {
    match schedule {
        Schedule::Sequential => clients.iter().map(|c| fine_tune(global, c, config)).collect(),
        Schedule::Parallel => clients.par_iter().map(|c| fine_tune(global, c, config)).collect(),
    }
}

/// FedAvg followed by one epoch of local fine-tuning per client.
pub fn run_fedavg_ft<S: Scalar>(
    clients: &mut [Client<S>],
    initial: &ModelParams<S>,
    config: &TrainConfig,
    schedule: Schedule,
) -> Result<PersonalizedOutcome<S>> {
    let run = run_fedavg(clients, initial, config, schedule)?;
    let models = fine_tune_all(&run.global, clients, config, schedule)?;
    evaluate_each("fedavg_ft", clients, models, run)
}

/// A differentiable training loss over parameter structures.
pub trait Objective<S: Scalar> {
    fn loss_and_gradient(&self, params: &ModelParams<S>, batch: &[Sample<S>]) -> Result<(S, ModelParams<S>)>;

    fn gradient(&self, params: &ModelParams<S>, batch: &[Sample<S>]) -> Result<ModelParams<S>> {
        Ok(self.loss_and_gradient(params, batch)?.1)
    }
}

/// Binary cross-entropy of the network output.
#[derive(Debug, Clone, Copy)]
pub struct CrossEntropy<S> {
    pub positive_weight: S,
}

impl<S: Scalar> Objective<S> for CrossEntropy<S> {
    fn loss_and_gradient(&self, params: &ModelParams<S>, batch: &[Sample<S>]) -> Result<(S, ModelParams<S>)> {
        loss_and_gradient(params, batch, self.positive_weight)
    }
}

/// Central-difference Hessian-vector product
/// `[grad(w + delta v) - grad(w - delta v)] / (2 delta)`.
pub fn hessian_vector_fd<S: Scalar, O: Objective<S>>(
    objective: &O,
    params: &ModelParams<S>,
    direction: &ModelParams<S>,
    batch: &[Sample<S>],
    delta: S,
) -> Result<ModelParams<S>> {
    if !(delta > S::zero()) {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    let plus = objective.gradient(&params.add_scaled(direction, delta)?, batch)?;
    let minus = objective.gradient(&params.add_scaled(direction, -delta)?, batch)?;
    Ok(plus.sub(&minus)?.scale((delta + delta).recip()))
}

/// Rates and finite-difference step of a Hessian-free meta update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetaRates<S> {
    pub inner: S,
    pub outer: S,
    pub delta: S,
}

/// One Hessian-free Per-FedAvg update:
///
/// ```text
/// g1 = grad(w, b1);  w' = w - inner * g1;  g2 = grad(w', b2)
/// d  = HVP(w, g2, b3) by central differences
/// w <- w - outer * (g2 - inner * d)
/// ```
///
/// Returns the updated parameters and the loss of `b2` at `w'`.
pub fn perfedavg_hf_step<S: Scalar, O: Objective<S>>(
    objective: &O,
    params: &ModelParams<S>,
    batches: (&[Sample<S>], &[Sample<S>], &[Sample<S>]),
    rates: &MetaRates<S>,
) -> Result<(ModelParams<S>, S)> {
    let (b1, b2, b3) = batches;
    if b1.is_empty() || b2.is_empty() || b3.is_empty() {
        return Err(Error::Empty("meta batch"));
    }
    let g1 = objective.gradient(params, b1)?;
    let adapted = params.add_scaled(&g1, -rates.inner)?;
    let (loss, g2) = objective.loss_and_gradient(&adapted, b2)?;
    let hvp = hessian_vector_fd(objective, params, &g2, b3, rates.delta)?;
    let inner = rates.inner;
    let direction = g2.zip_with(&hvp, |g, d| g - inner * d)?;
    Ok((params.zip_with(&direction, |w, g| w - rates.outer * g)?, loss))
}

fn gather<S: Clone>(data: &[S], indices: &[usize]) -> Vec<S> {
    indices.iter().map(|&i| data[i].clone()).collect()
}

/// `local_steps` meta updates from the client's current model. The middle
/// batch of each triple comes from the client's training stream, the outer
/// two from its auxiliary stream and are disjoint from it whenever the data
/// allows.
fn meta_round<S: Scalar>(client: &mut Client<S>, config: &TrainConfig) -> Result<(ModelParams<S>, S)> {
    let objective = CrossEntropy { positive_weight: S::lit(config.positive_weight) };
    let rates = MetaRates {
        inner: S::lit(config.inner_rate()),
        outer: S::lit(config.outer_rate()),
        delta: S::lit(config.hf_delta),
    };
    let mut params = client.params.clone();
    let mut total = S::zero();
    {
        let (data, main, aux) = client.streams_mut();
        for _ in 0..config.local_steps {
            let i2 = main.next_batch();
            let i1 = aux.next_batch_excluding(&i2);
            let taken: Vec<usize> = i2.iter().chain(&i1).copied().collect();
            let i3 = aux.next_batch_excluding(&taken);
            let (b1, b2, b3) = (gather(data, &i1), gather(data, &i2), gather(data, &i3));
            let (next, loss) = perfedavg_hf_step(&objective, &params, (&b1, &b2, &b3), &rates)?;
            params = next;
            total = total + loss;
        }
    }
    client.params = params.clone();
    client.prev_local = Some(params.clone());
    let mean = if config.local_steps == 0 { S::zero() } else { total / S::from_count(config.local_steps) };
    Ok((params, mean))
}

/// Per-FedAvg with Hessian-free meta updates, FedAvg aggregation, then one
/// epoch of fine-tuning per client.
pub fn run_perfedavg_hf<S: Scalar>(
    clients: &mut [Client<S>],
    initial: &ModelParams<S>,
    config: &TrainConfig,
    schedule: Schedule,
) -> Result<PersonalizedOutcome<S>> {
    let run = run_rounds(clients, initial, config.global_rounds, schedule, |client, global, _| {
        client.synchronize(global)?;
        meta_round(client, config)
    })?;
    let models = fine_tune_all(&run.global, clients, config, schedule)?;
    evaluate_each("perfedavg_hf", clients, models, run)
}

/// Blends the previous local model toward the global one:
/// lower layers are copied from `global`; each entry of the top `p` layers
/// becomes `w * global + (1 - w) * local_prev`, i.e.
/// `local_prev + (global - local_prev) * w`.
pub fn ala_init<S: Scalar>(
    local_prev: &ModelParams<S>,
    global: &ModelParams<S>,
    weights: &AlaWeights<S>,
    top_layers: usize,
) -> Result<ModelParams<S>> {
    let l = global.layer_count();
    if top_layers > l {
        return Err(Error::invalid(format!("top_layers = {top_layers} exceeds layer count {l}")));
    }
    if !local_prev.same_shape(global) || weights.top_layers() != top_layers {
        return Err(Error::ShapeMismatch);
    }
    let mut out = global.clone();
    for ((dst, prev), w) in out.layers[l - top_layers..].iter_mut().zip(&local_prev.layers[l - top_layers..]).zip(&weights.layers) {
        if w.weights.len() != dst.weights.len() || w.bias.len() != dst.bias.len() {
            return Err(Error::ShapeMismatch);
        }
        let blend = |g: &mut S, p: S, w: S| *g = w * *g + (S::one() - w) * p;
        for ((g, &p), &w) in dst.weights.iter_mut().zip(&prev.weights).zip(&w.weights) {
            blend(g, p, w);
        }
        for ((g, &p), &w) in dst.bias.iter_mut().zip(&prev.bias).zip(&w.bias) {
            blend(g, p, w);
        }
    }
    Ok(out)
}

/// Result of ALA weight learning.
#[derive(Debug, Clone)]
pub struct AlaLearning<S> {
    pub weights: AlaWeights<S>,
    /// Subsample loss before each update.
    pub losses: Vec<S>,
}

/// Settings of one weight-learning call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlaSchedule<S> {
    pub top_layers: usize,
    pub learning_rate: S,
    pub max_updates: usize,
    pub window: usize,
    pub tolerance: S,
    pub positive_weight: S,
}

impl<S: Scalar> AlaSchedule<S> {
    /// Full learning as configured.
    pub fn from_config(config: &TrainConfig) -> Self {
        Self {
            top_layers: config.ala_top_layers,
            learning_rate: S::lit(config.ala_weight_lr),
            max_updates: config.ala_max_updates,
            window: config.ala_window,
            tolerance: S::lit(config.ala_convergence_tol),
            positive_weight: S::lit(config.positive_weight),
        }
    }
}

fn window_std<S: Scalar>(values: &[S]) -> S {
    let mean = scalar::mean(values);
    (scalar::sum(values.iter().map(|&v| (v - mean) * (v - mean))) / S::from_count(values.len())).sqrt()
}

/// Learns blending weights by projected gradient descent on the subsample
/// loss of the blended model. Model parameters stay frozen; the gradient
/// with respect to each weight is the parameter gradient times
/// `global - local_prev`. Stops when the last `window` losses have standard
/// deviation below `tolerance`, or after `max_updates` updates.
pub fn learn_ala_weights<S: Scalar>(
    subsample: &[Sample<S>],
    global: &ModelParams<S>,
    local_prev: &ModelParams<S>,
    start: AlaWeights<S>,
    schedule: &AlaSchedule<S>,
) -> Result<AlaLearning<S>> {
    if subsample.is_empty() {
        return Err(Error::Empty("ALA subsample"));
    }
    let p = schedule.top_layers;
    let l = global.layer_count();
    let diff = global.sub(local_prev)?;
    let mut weights = start;
    let mut losses = Vec::new();
    for _ in 0..schedule.max_updates {
        let blended = ala_init(local_prev, global, &weights, p)?;
        let (loss, grad) = loss_and_gradient(&blended, subsample, schedule.positive_weight)?;
        losses.push(loss);
        let (grad_top, diff_top) = (&grad.layers[l - p..], &diff.layers[l - p..]);
        let grad_w = grad_top
            .iter()
            .zip(diff_top)
            .flat_map(|(g, d)| g.weights.iter().chain(&g.bias).zip(d.weights.iter().chain(&d.bias)))
            .map(|(&g, &d)| g * d);
        for (w, gw) in weights.values_mut().zip(grad_w) {
            *w = (*w - schedule.learning_rate * gw).max(S::zero()).min(S::one());
        }
        if losses.len() >= schedule.window && window_std(&losses[losses.len() - schedule.window..]) < schedule.tolerance {
            break;
        }
    }
    Ok(AlaLearning { weights, losses })
}

/// Seeded ζ-percent subsample of the client's training split.
fn ala_subsample<S: Scalar>(client: &mut Client<S>, percent: f64) -> Vec<Sample<S>> {
    let n = client.train_size();
    let k = round_half_up(percent / 100.0 * n as f64).clamp(1, n);
    let mut picks = index::sample(client.ala_rng_mut(), n, k).into_vec();
    picks.sort_unstable();
    gather(client.train_data(), &picks)
}

/// FedALA synchronization for one client: plain copy when no previous local
/// model exists, otherwise learn (first time) or refresh (later) the weights
/// and blend.
fn ala_synchronize<S: Scalar>(client: &mut Client<S>, global: &ModelParams<S>, config: &TrainConfig) -> Result<()> {
    let Some(prev) = client.prev_local.clone() else {
        return client.synchronize(global);
    };
    let p = config.ala_top_layers;
    let weights = if config.ala_freeze_weights {
        AlaWeights::ones(global, p)?
    } else {
        let mut schedule = AlaSchedule::from_config(config);
        let start = match client.ala_weights.take() {
            None => AlaWeights::ones(global, p)?,
            Some(w) => {
                schedule.max_updates = 1;
                w
            }
        };
        let subsample = ala_subsample(client, config.ala_data_percent);
        learn_ala_weights(&subsample, global, &prev, start, &schedule)?.weights
    };
    client.params = ala_init(&prev, global, &weights, p)?;
    client.ala_weights = Some(weights);
    Ok(())
}

/// FedALA: adaptive local aggregation replaces plain synchronization; the
/// personalized model of each client is its last local model.
pub fn run_fedala<S: Scalar>(
    clients: &mut [Client<S>],
    initial: &ModelParams<S>,
    config: &TrainConfig,
    schedule: Schedule,
) -> Result<PersonalizedOutcome<S>> {
    if config.ala_top_layers > initial.layer_count() {
        return Err(Error::invalid(format!(
            "ala_top_layers = {} exceeds layer count {}",
            config.ala_top_layers,
            initial.layer_count()
        )));
    }
    let run = run_rounds(clients, initial, config.global_rounds, schedule, |client, global, _| {
        ala_synchronize(client, global, config)?;
        client.local_round(config)
    })?;
    let models = clients.iter().map(|c| c.params.clone()).collect();
    evaluate_each("fedala", clients, models, run)
}
