//! In-process FedAvg simulation.
//!
//! Each [`Client`] owns its data and random streams; the server side only
//! ever sees parameter structures and training-set sizes.

use std::io::Write;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::neural::{evaluate, train_steps, BatchStream, MetricsReport, ModelParams, Sample, TrainConfig};
use crate::personalization::AlaWeights;
use crate::rng::{self, Purpose, Rng};
use crate::scalar::Scalar;

/// One participant: a private dataset plus its local model state.
#[derive(Debug, Clone)]
pub struct Client<S> {
    id: usize,
    seed: u64,
    train: Vec<Sample<S>>,
    test: Vec<Sample<S>>,
    /// Current local parameters.
    pub params: ModelParams<S>,
    /// Last model this client trained, kept across rounds for FedALA.
    pub prev_local: Option<ModelParams<S>>,
    /// Client-private FedALA blending weights.
    pub ala_weights: Option<AlaWeights<S>>,
    batches: BatchStream,
    meta_batches: BatchStream,
    ala_rng: Rng,
}

impl<S: Scalar> Client<S> {
    /// Client `id` with its random streams keyed by `(seed, id)`.
    pub fn new(
        id: usize,
        train: Vec<Sample<S>>,
        test: Vec<Sample<S>>,
        template: &ModelParams<S>,
        batch_size: usize,
        seed: u64,
    ) -> Result<Self> {
        let batches = BatchStream::new(train.len(), batch_size, rng::client_stream(seed, id, Purpose::Batches))?;
        let meta_batches =
            BatchStream::new(train.len(), batch_size, rng::client_stream(seed, id, Purpose::MetaBatches))?;
        Ok(Self {
            id,
            seed,
            train,
            test,
            params: template.clone(),
            prev_local: None,
            ala_weights: None,
            batches,
            meta_batches,
            ala_rng: rng::client_stream(seed, id, Purpose::AlaSubsample),
        })
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `|D_i|`, the weight of this client in aggregation.
    pub fn train_size(&self) -> usize {
        self.train.len()
    }

    pub fn batch_clamped(&self) -> bool {
        self.batches.was_clamped()
    }

    pub(crate) fn train_data(&self) -> &[Sample<S>] {
        &self.train
    }


    pub(crate) fn ala_rng_mut(&mut self) -> &mut Rng {
        &mut self.ala_rng
    }

    /// Training batch stream and the auxiliary stream used by meta-learning.
    pub(crate) fn streams_mut(&mut self) -> (&[Sample<S>], &mut BatchStream, &mut BatchStream) {
        (&self.train, &mut self.batches, &mut self.meta_batches)
    }

    /// Metrics of `params` on this client's test split.
    pub fn evaluate(&self, params: &ModelParams<S>) -> Result<MetricsReport<S>> {
        evaluate(params, &self.test)
    }

    /// Metrics of `params` on this client's training split.
    pub fn evaluate_train(&self, params: &ModelParams<S>) -> Result<MetricsReport<S>> {
        evaluate(params, &self.train)
    }

    /// Test-split scores and labels, for fairness and reporting.
    pub fn test_scores(&self, params: &ModelParams<S>) -> Result<(Vec<S>, Vec<bool>)> {
        let scores = self.test.iter().map(|s| params.forward(&s.x)).collect::<Result<Vec<_>>>()?;
        Ok((scores, self.test.iter().map(|s| s.label).collect()))
    }

    /// Overwrites the local model with a copy of the global one.
    pub fn synchronize(&mut self, global: &ModelParams<S>) -> Result<()> {
        if !self.params.same_shape(global) {
            return Err(Error::ShapeMismatch);
        }
        self.params = global.clone();
        Ok(())
    }

    /// `local_steps` SGD steps from the current local model; returns the
    /// trained parameters and the mean batch loss.
    pub fn local_round(&mut self, config: &TrainConfig) -> Result<(ModelParams<S>, S)> {
        let run = train_steps(&self.params, &self.train, &config.sgd(config.local_steps), &mut self.batches)?;
        self.params = run.params.clone();
        self.prev_local = Some(run.params.clone());
        Ok((run.params, run.mean_loss))
    }
}

/// Server-side bookkeeping of one aggregation round.
#[derive(Debug, Clone)]
pub struct RoundRecord<S> {
    pub round: usize,
    /// `(client id, mean training loss)` in client order.
    pub client_losses: Vec<(usize, S)>,
    pub global_checksum: u64,
    pub elapsed: Duration,
}

/// Whether clients train one after another or concurrently.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Schedule {
    #[default]
    Sequential,
    Parallel,
}

/// Weighted mean `sum_i (n_i / N) * w_i`.
pub fn aggregate<S: Scalar>(locals: &[ModelParams<S>], sizes: &[usize]) -> Result<ModelParams<S>> {
    let first = locals.first().ok_or(Error::Empty("local model list"))?;
    if locals.len() != sizes.len() {
        return Err(Error::DimensionMismatch { expected: locals.len(), actual: sizes.len() });
    }
    if sizes.contains(&0) {
        return Err(Error::invalid("client dataset sizes must be positive"));
    }
    let total = S::from_count(sizes.iter().sum());
    let mut global = first.zeros_like();
    for (local, &n) in locals.iter().zip(sizes) {
        global = global.add_scaled(local, S::from_count(n) / total)?;
    }
    Ok(global)
}

/// Result of a federated training run.
#[derive(Debug, Clone)]
pub struct FedRun<S> {
    pub global: ModelParams<S>,
    pub history: Vec<RoundRecord<S>>,
}

/// Runs `rounds` of client updates followed by aggregation. `update` turns a
/// client and the current global model into that client's new local model
/// and its training loss.
pub fn run_rounds<S, F>(
    clients: &mut [Client<S>],
    initial: &ModelParams<S>,
    rounds: usize,
    schedule: Schedule,
    update: F,
) -> Result<FedRun<S>>
where
    S: Scalar,
    F: Fn(&mut Client<S>, &ModelParams<S>, usize) -> Result<(ModelParams<S>, S)> + Sync,
{
    if clients.is_empty() {
        return Err(Error::Empty("client list"));
    }
    let mut global = initial.clone();
    let mut history = Vec::with_capacity(rounds);
    for round in 0..rounds {
        let start = Instant::now();
        let results: Vec<Result<(ModelParams<S>, S)>> = match schedule {
            Schedule::Sequential => clients.iter_mut().map(|c| update(c, &global, round)).collect(),
            Schedule::Parallel => clients.par_iter_mut().map(|c| update(c, &global, round)).collect(),
        };
        let (locals, losses): (Vec<_>, Vec<_>) = results.into_iter().collect::<Result<Vec<_>>>()?.into_iter().unzip();
        let sizes: Vec<usize> = clients.iter().map(Client::train_size).collect();
        global = aggregate(&locals, &sizes)?;
        history.push(RoundRecord {
            round,
            client_losses: clients.iter().map(Client::id).zip(losses).collect(),
            global_checksum: global.checksum(),
            elapsed: start.elapsed(),
        });
    }
    Ok(FedRun { global, history })
}

/// Vanilla FedAvg: synchronize, train locally, aggregate.
pub fn run_fedavg<S: Scalar>(
    clients: &mut [Client<S>],
    initial: &ModelParams<S>,
    config: &TrainConfig,
    schedule: Schedule,
) -> Result<FedRun<S>> {
    run_rounds(clients, initial, config.global_rounds, schedule, |client, global, _| {
        client.synchronize(global)?;
        client.local_round(config)
    })
}

/// Writes `round,client_id,train_loss` rows.
pub fn write_history_csv<S: Scalar>(mut out: impl Write, history: &[RoundRecord<S>]) -> Result<()> {
    writeln!(out, "round,client_id,train_loss")?;
    for record in history {
        for (id, loss) in &record.client_losses {
            writeln!(out, "{},{id},{loss}", record.round)?;
        }
    }
    Ok(())
}
