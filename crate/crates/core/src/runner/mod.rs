//! Multi-seed experiments: data preparation, every training regime, fairness
//! and explanations, and the reports written from them.

mod config;
mod report;

pub use config::{parse_config, ClientSource, ExperimentConfig, ExplainSpec, Method};
pub use report::{emit_reports, summarize, SummaryRow};

use rand::seq::index;
use rayon::prelude::*;

use crate::analysis::{
    fairness_report, global_importance, shapley_values, FairnessReport, Importance, PairExplanation, Rates,
};
use crate::error::{Error, Result};
use crate::features::{build_examples, ks_statistic, PairExample, Standardizer, RESOURCE_ALLOCATION};
use crate::federation::{run_fedavg, Client, Schedule};
use crate::graph::{generate_synthetic, load_edge_list, sample_pair_universe, temporal_split, train_test_split, SlnGraph, SplitSpec};
use crate::neural::{evaluate, train_steps, BatchStream, Classifier, MetricsReport, ModelParams, Sample};
use crate::personalization::{run_fedala, run_fedavg_ft, run_perfedavg_hf};
use crate::rng::{self, Purpose};

/// One client's featurized data for one seed.
#[derive(Debug, Clone)]
pub struct ClientData {
    pub train: Vec<PairExample<f64>>,
    pub test: Vec<PairExample<f64>>,
    /// Fitted on this client's training split only.
    pub standardizer: Standardizer<f64>,
}

fn samples(examples: &[PairExample<f64>], standardizer: &Standardizer<f64>) -> Vec<Sample<f64>> {
    examples.iter().map(|e| Sample::new(standardizer.apply(&e.features).to_vec(), e.label)).collect()
}

/// Loads or generates every client's current network.
pub fn load_graphs(cfg: &ExperimentConfig) -> Result<Vec<SlnGraph>> {
    cfg.clients
        .iter()
        .map(|source| match source {
            ClientSource::EdgeList { path } => load_edge_list(&std::fs::read_to_string(path)?),
            ClientSource::Synthetic(spec) => generate_synthetic(spec),
        })
        .collect()
}

/// Pair universe, earlier snapshot, features and train/test split of one
/// client, all keyed by `(seed, client)`.
pub fn prepare_client(graph: &SlnGraph, cfg: &ExperimentConfig, seed: u64, client: usize) -> Result<ClientData> {
    let data_seed = rng::derive_seed(seed.wrapping_add(cfg.split.seed), client);
    let universe = sample_pair_universe(graph, cfg.negatives_per_positive, data_seed)?;
    let spec = SplitSpec { seed: data_seed, ..cfg.split };
    let temporal = temporal_split(graph, &universe, &spec)?;
    let examples = build_examples(&temporal, &temporal.pair_universe)?;
    let (train, test) = train_test_split(&examples, cfg.split.train_fraction, data_seed)?;
    if test.is_empty() {
        return Err(Error::Empty("test split"));
    }
    let standardizer = Standardizer::fit(train.iter().map(|e| &e.features))?;
    Ok(ClientData { train, test, standardizer })
}

/// Metrics of one (method, client, seed) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub method: Method,
    pub client: usize,
    pub seed: u64,
    pub metrics: MetricsReport<f64>,
}

/// Pairwise non-IID evidence: KS distance between two clients'
/// resource-allocation values over their training pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct KsRecord {
    pub seed: u64,
    pub a: usize,
    pub b: usize,
    pub ks: f64,
}

/// Shapley explanations for one client's model.
#[derive(Debug, Clone)]
pub struct ClientExplanations {
    pub method: Method,
    pub client: usize,
    pub seed: u64,
    pub pairs: Vec<PairExplanation>,
    pub importance: Importance<f64>,
}

/// Everything a run produces, in deterministic order.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub cells: Vec<Cell>,
    pub fairness: Vec<(Method, u64, FairnessReport<f64>)>,
    pub ks: Vec<KsRecord>,
    pub explanations: Vec<ClientExplanations>,
    /// Final per-client models `(method, seed, client, model)`, kept when
    /// `save_models` is set.
    pub models: Vec<(Method, u64, usize, Classifier<f64>)>,
    /// Number of times client training data was pooled. Only the
    /// centralized regime pools; federated paths must leave this at zero.
    pub pooled_reads: usize,
}

/// Output of one method on one seed: a model per client.
struct MethodResult {
    method: Method,
    classifiers: Vec<Classifier<f64>>,
    metrics: Vec<MetricsReport<f64>>,
    rates: Vec<Rates<f64>>,
    pooled: bool,
}

fn schedule(cfg: &ExperimentConfig) -> Schedule {
    if cfg.parallel {
        Schedule::Parallel
    } else {
        Schedule::Sequential
    }
}

fn build_clients(data: &[ClientData], template: &ModelParams<f64>, batch: usize, seed: u64) -> Result<Vec<Client<f64>>> {
    data.iter()
        .enumerate()
        .map(|(i, d)| {
            Client::new(i, samples(&d.train, &d.standardizer), samples(&d.test, &d.standardizer), template, batch, seed)
        })
        .collect()
}

fn rates_of(params: &ModelParams<f64>, test: &[Sample<f64>]) -> Result<Rates<f64>> {
    let report = evaluate(params, test)?;
    Ok(Rates::from_confusion(&report.counts))
}

/// Single model on the concatenated training splits, scaled by statistics
/// of the pooled data, evaluated on each client's test split. Uses the same
/// initial model and the batch stream of client 0, so with one client it
/// follows exactly the FedAvg trajectory of matching step count.
fn run_centralized(data: &[ClientData], initial: &ModelParams<f64>, cfg: &ExperimentConfig, seed: u64) -> Result<MethodResult> {
    let train_cfg = cfg.train_config(Method::Centralized)?;
    let pooled: Vec<PairExample<f64>> = data.iter().flat_map(|d| d.train.iter().copied()).collect();
    let standardizer = Standardizer::fit(pooled.iter().map(|e| &e.features))?;
    let train = samples(&pooled, &standardizer);
    let mut stream = BatchStream::new(train.len(), train_cfg.batch_size, rng::client_stream(seed, 0, Purpose::Batches))?;
    let steps = train_cfg.epochs * stream.batches_per_pass();
    let params = train_steps(initial, &train, &train_cfg.sgd(steps), &mut stream)?.params;
    let mut metrics = Vec::with_capacity(data.len());
    let mut rates = Vec::with_capacity(data.len());
    for d in data {
        let test = samples(&d.test, &standardizer);
        metrics.push(evaluate(&params, &test)?);
        rates.push(rates_of(&params, &test)?);
    }
    let classifier = Classifier { params, standardizer };
    Ok(MethodResult { method: Method::Centralized, classifiers: vec![classifier; data.len()], metrics, rates, pooled: true })
}

fn run_federated(
    method: Method,
    data: &[ClientData],
    initial: &ModelParams<f64>,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<MethodResult> {
    let train_cfg = cfg.train_config(method)?;
    let mut clients = build_clients(data, initial, train_cfg.batch_size, seed)?;
    let sched = schedule(cfg);
    let models: Vec<ModelParams<f64>> = match method {
        Method::Fedavg => {
            let run = run_fedavg(&mut clients, initial, train_cfg, sched)?;
            vec![run.global; clients.len()]
        }
        Method::FedavgFt => run_fedavg_ft(&mut clients, initial, train_cfg, sched)?.models,
        Method::PerfedavgHf => run_perfedavg_hf(&mut clients, initial, train_cfg, sched)?.models,
        Method::Fedala => run_fedala(&mut clients, initial, train_cfg, sched)?.models,
        Method::Centralized => unreachable!("centralized is not federated"),
    };
    let mut metrics = Vec::with_capacity(clients.len());
    let mut rates = Vec::with_capacity(clients.len());
    for (client, params) in clients.iter().zip(&models) {
        let report = client.evaluate(params)?;
        rates.push(Rates::from_confusion(&report.counts));
        metrics.push(report);
    }
    let classifiers = models
        .into_iter()
        .zip(data)
        .map(|(params, d)| Classifier { params, standardizer: d.standardizer.clone() })
        .collect();
    Ok(MethodResult { method, classifiers, metrics, rates, pooled: false })
}

fn stage_name(method: Method) -> &'static str {
    match method {
        Method::Centralized => "train centralized",
        Method::Fedavg => "train fedavg",
        Method::FedavgFt => "train fedavg_ft",
        Method::PerfedavgHf => "train perfedavg_hf",
        Method::Fedala => "train fedala",
    }
}

fn explain_client(
    classifier: &Classifier<f64>,
    data: &ClientData,
    spec: &ExplainSpec,
    seed: u64,
    client: usize,
) -> Result<ClientExplanations> {
    let n = data.train.len();
    let k = spec.background.clamp(1, n);
    let mut picks = index::sample(&mut rng::client_stream(seed, client, Purpose::Background), n, k).into_vec();
    picks.sort_unstable();
    let background: Vec<[f64; 6]> = picks.iter().map(|&i| data.train[i].features.to_array()).collect();
    let pairs = data
        .test
        .iter()
        .take(spec.pairs.max(1))
        .map(|e| Ok(PairExplanation::new(e.u, e.v, &shapley_values(classifier, &e.features.to_array(), &background)?)))
        .collect::<Result<Vec<_>>>()?;
    let explanations: Vec<_> = pairs
        .iter()
        .map(|p| crate::analysis::ShapleyExplanation { base_value: p.base, phi: p.phi, predicted: p.predicted })
        .collect();
    Ok(ClientExplanations { method: spec.method, client, seed, importance: global_importance(&explanations)?, pairs })
}

/// Runs every requested method for every seed.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    if let Some(spec) = &cfg.explain {
        if !cfg.methods.contains(&spec.method) {
            return Err(Error::Config(format!("explain.method {} is not among the methods run", spec.method)));
        }
    }
    let graphs = load_graphs(cfg).map_err(|e| e.in_stage("load data"))?;
    let dims = cfg.layer_dims();

    let mut report = RunReport {
        config: cfg.clone(),
        cells: Vec::new(),
        fairness: Vec::new(),
        ks: Vec::new(),
        explanations: Vec::new(),
        models: Vec::new(),
        pooled_reads: 0,
    };
    for (seed_index, &seed) in cfg.seeds.iter().enumerate() {
        let data: Vec<ClientData> = graphs
            .par_iter()
            .enumerate()
            .map(|(i, g)| prepare_client(g, cfg, seed, i))
            .collect::<Result<_>>()
            .map_err(|e| e.in_stage("features"))?;

        let ra: Vec<Vec<f64>> =
            data.iter().map(|d| d.train.iter().map(|e| e.features.to_array()[RESOURCE_ALLOCATION]).collect()).collect();
        for a in 0..ra.len() {
            for b in a + 1..ra.len() {
                report.ks.push(KsRecord { seed, a, b, ks: ks_statistic(&ra[a], &ra[b])? });
            }
        }

        let initial = ModelParams::init(&dims, &mut rng::init_stream(seed))?.with_activation(cfg.activation);
        let results: Vec<MethodResult> = cfg
            .methods
            .par_iter()
            .map(|&method| {
                match method {
                    Method::Centralized => run_centralized(&data, &initial, cfg, seed),
                    _ => run_federated(method, &data, &initial, cfg, seed),
                }
                .map_err(|e| e.in_stage(stage_name(method)))
            })
            .collect::<Result<_>>()?;

        for result in results {
            report.pooled_reads += usize::from(result.pooled);
            for (client, metrics) in result.metrics.into_iter().enumerate() {
                report.cells.push(Cell { method: result.method, client, seed, metrics });
            }
            report.fairness.push((result.method, seed, fairness_report(&result.rates)));
            if let Some(spec) = cfg.explain.as_ref().filter(|s| s.method == result.method && seed_index == 0) {
                let explained = result
                    .classifiers
                    .par_iter()
                    .zip(&data)
                    .enumerate()
                    .map(|(i, (c, d))| explain_client(c, d, spec, seed, i))
                    .collect::<Result<Vec<_>>>()
                    .map_err(|e| e.in_stage("explain"))?;
                report.explanations.extend(explained);
            }
            if cfg.save_models {
                for (client, classifier) in result.classifiers.into_iter().enumerate() {
                    report.models.push((result.method, seed, client, classifier));
                }
            }
        }
    }
    Ok(report)
}
