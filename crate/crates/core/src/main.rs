use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::seq::index;

use slnfed::analysis::{confusion_rates, fairness_report, global_importance, shapley_values, PairExplanation, Rates};
use slnfed::features::{build_examples, read_examples_csv, write_examples_csv, Standardizer, FEATURE_NAMES};
use slnfed::graph::{generate_synthetic, load_edge_list, sample_pair_universe, temporal_split, train_test_split, SbmSpec, SplitSpec};
use slnfed::neural::{evaluate, load_checkpoint, save_checkpoint, train_steps, BatchStream, Classifier, ModelParams, Sample, TrainConfig};
use slnfed::rng::{self, Purpose};
use slnfed::runner::{emit_reports, run_experiment, summarize, ExperimentConfig};
use slnfed::{Example, Result};

/// Federated link prediction on social learning networks.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a stochastic-block-model network as an edge list.
    Generate {
        #[arg(long, default_value_t = 500)]
        nodes: usize,
        #[arg(long, default_value_t = 4)]
        communities: usize,
        #[arg(long, default_value_t = 0.05)]
        intra_p: f64,
        #[arg(long, default_value_t = 0.005)]
        inter_p: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build labelled pair features from an edge list.
    Featurize {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        negatives_per_positive: f64,
        #[arg(long, default_value_t = 0.2)]
        removal_fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one classifier on featurized pairs and save a checkpoint.
    Train {
        #[arg(long)]
        examples: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = [32, 16])]
        hidden: Vec<usize>,
        #[arg(long, default_value_t = 0.01)]
        learning_rate: f64,
        #[arg(long, default_value_t = 64)]
        batch_size: usize,
        #[arg(long, default_value_t = 20)]
        epochs: usize,
        #[arg(long, default_value_t = 0.8)]
        train_fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Per-client TPR/FPR and their ranges from a `client,score,label` CSV.
    Fairness {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
    },
    /// Exact Shapley values of a checkpoint's predictions.
    Explain {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        examples: PathBuf,
        /// Rows drawn from the example file as the background set.
        #[arg(long, default_value_t = 100)]
        background: usize,
        /// Number of leading rows to explain.
        #[arg(long, default_value_t = 10)]
        pairs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the explanations JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a full experiment from a config file or run manifest and write all reports.
    Report {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the configured output directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn samples(examples: &[Example], standardizer: &Standardizer<f64>) -> Vec<Sample<f64>> {
    examples.iter().map(|e| Sample::new(standardizer.apply(&e.features).to_vec(), e.label)).collect()
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Generate { nodes, communities, intra_p, inter_p, seed, out } => {
            let graph = generate_synthetic(&SbmSpec { nodes, communities, intra_p, inter_p, seed })?;
            fs::write(&out, graph.to_edge_list())?;
            println!("wrote {} nodes, {} edges to {}", graph.node_count(), graph.edge_count(), out.display());
        }
        Command::Featurize { graph, negatives_per_positive, removal_fraction, seed, out } => {
            let graph = load_edge_list(&fs::read_to_string(graph)?)?;
            let universe = sample_pair_universe(&graph, negatives_per_positive, seed)?;
            let split = SplitSpec { removal_fraction, seed, ..SplitSpec::default() };
            let temporal = temporal_split(&graph, &universe, &split)?;
            let examples: Vec<Example> = build_examples(&temporal, &temporal.pair_universe)?;
            write_examples_csv(std::io::BufWriter::new(fs::File::create(&out)?), &examples)?;
            let positives = examples.iter().filter(|e| e.label).count();
            println!("wrote {} pairs ({positives} linked) to {}", examples.len(), out.display());
        }
        Command::Train { examples, out, hidden, learning_rate, batch_size, epochs, train_fraction, seed } => {
            let examples: Vec<Example> = read_examples_csv(&fs::read_to_string(examples)?)?;
            let (train, test) = train_test_split(&examples, train_fraction, seed)?;
            let standardizer = Standardizer::fit(train.iter().map(|e| &e.features))?;
            let (train, test) = (samples(&train, &standardizer), samples(&test, &standardizer));
            let mut dims = vec![FEATURE_NAMES.len()];
            dims.extend(&hidden);
            dims.push(1);
            let initial = ModelParams::init(&dims, &mut rng::init_stream(seed))?;
            let config = TrainConfig { learning_rate, batch_size, epochs, ..TrainConfig::centralized() };
            config.validate()?;
            let mut stream = BatchStream::new(train.len(), batch_size, rng::client_stream(seed, 0, Purpose::Batches))?;
            let steps = epochs * stream.batches_per_pass();
            let params = train_steps(&initial, &train, &config.sgd(steps), &mut stream)?.params;
            let report = evaluate(&params, &test)?;
            save_checkpoint(&out, &Classifier { params, standardizer })?;
            let auc = report.auc.map(|a| format!("{a:.4}")).unwrap_or_else(|| "undefined".into());
            println!("test accuracy {:.4}, loss {:.4}, auc {auc}; model saved to {}", report.accuracy, report.mean_loss, out.display());
        }
        Command::Fairness { scores, threshold } => {
            let text = fs::read_to_string(scores)?;
            let mut per_client: Vec<(Vec<f64>, Vec<bool>)> = Vec::new();
            for (i, line) in text.lines().enumerate().skip(1).filter(|(_, l)| !l.trim().is_empty()) {
                let err = |m: &str| slnfed::Error::Parse { line: i + 1, message: m.into() };
                let fields: Vec<&str> = line.split(',').map(str::trim).collect();
                let [client, score, label] = fields[..] else { return Err(err("expected client,score,label")) };
                let client: usize = client.parse().map_err(|_| err("bad client index"))?;
                if per_client.len() <= client {
                    per_client.resize(client + 1, (Vec::new(), Vec::new()));
                }
                per_client[client].0.push(score.parse().map_err(|_| err("bad score"))?);
                per_client[client].1.push(label == "1");
            }
            let rates = per_client
                .iter()
                .map(|(s, l)| confusion_rates(s, l, threshold))
                .collect::<Result<Vec<Rates<f64>>>>()?;
            let report = fairness_report(&rates);
            let mut out = std::io::stdout().lock();
            writeln!(out, "client,tpr,fpr")?;
            report.write_csv_rows(&mut out, "")?;
        }
        Command::Explain { model, examples, background, pairs, seed, out } => {
            let model: Classifier<f64> = load_checkpoint(model)?;
            let examples: Vec<Example> = read_examples_csv(&fs::read_to_string(examples)?)?;
            if examples.is_empty() {
                return Err(slnfed::Error::Empty("example file"));
            }
            let k = background.clamp(1, examples.len());
            let mut picks = index::sample(&mut rng::stream(seed, 0), examples.len(), k).into_vec();
            picks.sort_unstable();
            let background: Vec<[f64; 6]> = picks.iter().map(|&i| examples[i].features.to_array()).collect();
            let mut records = Vec::new();
            let mut explanations = Vec::new();
            for e in examples.iter().take(pairs) {
                let explanation = shapley_values(&model, &e.features.to_array(), &background)?;
                records.push(PairExplanation::new(e.u, e.v, &explanation));
                explanations.push(explanation);
            }
            let json = serde_json::to_string_pretty(&records)?;
            match out {
                Some(path) => fs::write(path, json + "\n")?,
                None => println!("{json}"),
            }
            let importance = global_importance(&explanations)?;
            for (rank, &f) in importance.ranking.iter().enumerate() {
                eprintln!("{}. {:<24} {:.6}", rank + 1, FEATURE_NAMES[f], importance.mean_abs_phi[f]);
            }
        }
        Command::Report { config, output } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(dir) = output {
                cfg.output = dir;
            }
            let report = run_experiment(&cfg)?;
            let files = emit_reports(&report, &cfg.output)?;
            println!("{:<14} {:>7} {:>17} {:>17}", "method", "client", "accuracy", "auc");
            for row in summarize(&report) {
                let client = row.client.map(|c| c.to_string()).unwrap_or_else(|| "all".into());
                let auc = row.auc.map(|(m, s)| format!("{m:.4} ± {s:.4}")).unwrap_or_else(|| "undefined".into());
                println!("{:<14} {client:>7} {:>17} {auc:>17}", row.method.name(), format!("{:.4} ± {:.4}", row.accuracy.0, row.accuracy.1));
            }
            println!("wrote {} files to {}", files.len(), cfg.output.display());
        }
    }
    Ok(())
}
