use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{loss_and_gradient, sgd_step, ModelParams, Sample};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::scalar::Scalar;

/// Hyperparameters of one training regime.
///
/// The constructors carry the per-method defaults; fields that a method does
/// not use are ignored by it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    /// SGD (or meta) steps per client per round.
    pub local_steps: usize,
    pub global_rounds: usize,
    /// Passes over the pooled data in the centralized regime.
    pub epochs: usize,
    /// Loss weight of positive examples.
    pub positive_weight: f64,
    /// Rate of the one-epoch fine-tuning pass; `None` means `learning_rate`.
    pub fine_tune_learning_rate: Option<f64>,
    /// Batch size of the fine-tuning pass; `None` means `batch_size`.
    pub fine_tune_batch_size: Option<usize>,
    /// Finite-difference step of the Hessian-free meta update.
    pub hf_delta: f64,
    /// Inner (adaptation) rate; `None` means `learning_rate`.
    pub meta_inner: Option<f64>,
    /// Outer (meta) rate; `None` means `learning_rate`.
    pub meta_outer: Option<f64>,
    /// Number of top layers blended by adaptive local aggregation.
    pub ala_top_layers: usize,
    /// Percentage of the local training split used to learn ALA weights.
    pub ala_data_percent: f64,
    pub ala_weight_lr: f64,
    pub ala_convergence_tol: f64,
    pub ala_window: usize,
    /// Hard cap on weight updates in a client's first learning round.
    pub ala_max_updates: usize,
    /// Keep ALA weights fixed at 1 (reduces FedALA to FedAvg when every layer is blended).
    pub ala_freeze_weights: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            batch_size: 256,
            local_steps: 200,
            global_rounds: 30,
            epochs: 200,
            positive_weight: 1.0,
            fine_tune_learning_rate: None,
            fine_tune_batch_size: None,
            hf_delta: 1e-3,
            meta_inner: None,
            meta_outer: None,
            ala_top_layers: 2,
            ala_data_percent: 80.0,
            ala_weight_lr: 1.0,
            ala_convergence_tol: 1e-3,
            ala_window: 10,
            ala_max_updates: 50,
            ala_freeze_weights: false,
        }
    }
}

impl TrainConfig {
    pub fn centralized() -> Self {
        Self { learning_rate: 0.001, epochs: 200, batch_size: 256, ..Self::default() }
    }

    pub fn fedavg() -> Self {
        Self { learning_rate: 0.001, global_rounds: 30, local_steps: 200, batch_size: 256, ..Self::default() }
    }

    pub fn fedavg_ft() -> Self {
        Self { learning_rate: 0.0001, batch_size: 64, local_steps: 200, global_rounds: 30, ..Self::default() }
    }

    pub fn perfedavg_hf() -> Self {
        Self { learning_rate: 0.01, batch_size: 256, local_steps: 350, global_rounds: 15, ..Self::default() }
    }

    pub fn fedala() -> Self {
        Self {
            learning_rate: 0.01,
            global_rounds: 30,
            local_steps: 100,
            batch_size: 128,
            ala_top_layers: 2,
            ala_data_percent: 80.0,
            ..Self::default()
        }
    }

    pub fn fine_tune_rate(&self) -> f64 {
        self.fine_tune_learning_rate.unwrap_or(self.learning_rate)
    }

    pub fn fine_tune_batch(&self) -> usize {
        self.fine_tune_batch_size.unwrap_or(self.batch_size)
    }

    pub fn inner_rate(&self) -> f64 {
        self.meta_inner.unwrap_or(self.learning_rate)
    }

    pub fn outer_rate(&self) -> f64 {
        self.meta_outer.unwrap_or(self.learning_rate)
    }

    pub fn sgd<S: Scalar>(&self, steps: usize) -> SgdSettings<S> {
        SgdSettings { learning_rate: S::lit(self.learning_rate), steps, positive_weight: S::lit(self.positive_weight) }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("learning_rate", self.learning_rate),
            ("positive_weight", self.positive_weight),
            ("hf_delta", self.hf_delta),
            ("ala_weight_lr", self.ala_weight_lr),
            ("ala_convergence_tol", self.ala_convergence_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("fine_tune_learning_rate", self.fine_tune_learning_rate),
            ("meta_inner", self.meta_inner),
            ("meta_outer", self.meta_outer),
        ] {
            if let Some(v) = v {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(Error::Config(format!("{name} must be non-negative, got {v}")));
                }
            }
        }
        if self.batch_size == 0 || self.fine_tune_batch_size == Some(0) {
            return Err(Error::Config("batch sizes must be positive".into()));
        }
        if !(self.ala_data_percent > 0.0 && self.ala_data_percent <= 100.0) {
            return Err(Error::Config(format!("ala_data_percent must lie in (0, 100], got {}", self.ala_data_percent)));
        }
        if self.ala_window == 0 || self.ala_top_layers == 0 {
            return Err(Error::Config("ala_window and ala_top_layers must be positive".into()));
        }
        Ok(())
    }
}

/// Seeded mini-batch sampler: walks a random permutation of the data without
/// replacement and reshuffles when it is exhausted. The last batch of a pass
/// may be shorter than the nominal size.
#[derive(Debug, Clone)]
pub struct BatchStream {
    order: Vec<usize>,
    cursor: usize,
    batch_size: usize,
    clamped: bool,
    rng: Rng,
}

impl BatchStream {
    /// Sampler over `len` examples. A batch size above `len` is clamped and
    /// flagged.
    pub fn new(len: usize, batch_size: usize, mut rng: Rng) -> Result<Self> {
        if len == 0 {
            return Err(Error::Empty("training data"));
        }
        if batch_size == 0 {
            return Err(Error::invalid("batch size must be positive"));
        }
        let mut order: Vec<usize> = (0..len).collect();
        order.shuffle(&mut rng);
        Ok(Self { order, cursor: 0, batch_size: batch_size.min(len), clamped: batch_size > len, rng })
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    /// Whether the requested batch size exceeded the data size.
    pub fn was_clamped(&self) -> bool {
        self.clamped
    }

    /// Batches in one full pass.
    pub fn batches_per_pass(&self) -> usize {
        self.order.len().div_ceil(self.batch_size)
    }

    fn next_index(&mut self) -> usize {
        if self.cursor == self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.cursor = 0;
        }
        self.cursor += 1;
        self.order[self.cursor - 1]
    }

    /// Indices of the next batch.
    pub fn next_batch(&mut self) -> Vec<usize> {
        if self.cursor == self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.cursor = 0;
        }
        let end = (self.cursor + self.batch_size).min(self.order.len());
        let batch = self.order[self.cursor..end].to_vec();
        self.cursor = end;
        batch
    }

    /// Next batch skipping indices in `exclude` (which are consumed from the
    /// pass). Falls back to an unrestricted batch when no other index can be
    /// found within one pass.
    pub fn next_batch_excluding(&mut self, exclude: &[usize]) -> Vec<usize> {
        let mut batch = Vec::with_capacity(self.batch_size);
        for _ in 0..self.order.len() {
            let i = self.next_index();
            if !exclude.contains(&i) {
                batch.push(i);
                if batch.len() == self.batch_size {
                    break;
                }
            }
        }
        if batch.is_empty() {
            batch = self.next_batch();
        }
        batch
    }
}

/// Gathers a batch by index.
pub(crate) fn gather<S: Clone>(data: &[S], indices: &[usize]) -> Vec<S> {
    indices.iter().map(|&i| data[i].clone()).collect()
}

/// Step count, rate and class weighting of a plain SGD run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdSettings<S> {
    pub learning_rate: S,
    pub steps: usize,
    pub positive_weight: S,
}

/// Result of [`train_steps`].
#[derive(Debug, Clone)]
pub struct TrainRun<S> {
    pub params: ModelParams<S>,
    /// Mean of the per-batch training losses, measured before each step.
    pub mean_loss: S,
    pub batch_clamped: bool,
}

/// Runs `settings.steps` mini-batch SGD steps drawn from `stream`.
pub fn train_steps<S: Scalar>(
    params: &ModelParams<S>,
    data: &[Sample<S>],
    settings: &SgdSettings<S>,
    stream: &mut BatchStream,
) -> Result<TrainRun<S>> {
    if stream.len() != data.len() {
        return Err(Error::DimensionMismatch { expected: data.len(), actual: stream.len() });
    }
    let mut params = params.clone();
    let mut total = S::zero();
    for _ in 0..settings.steps {
        let batch = gather(data, &stream.next_batch());
        let (loss, grad) = loss_and_gradient(&params, &batch, settings.positive_weight)?;
        params = sgd_step(&params, &grad, settings.learning_rate)?;
        total = total + loss;
    }
    let mean_loss = if settings.steps == 0 { S::zero() } else { total / S::from_count(settings.steps) };
    Ok(TrainRun { params, mean_loss, batch_clamped: stream.was_clamped() })
}
