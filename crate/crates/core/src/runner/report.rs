//! Report files of a run. Every file is written in a fixed row and column
//! order so identical runs produce identical bytes.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{Method, RunReport};
use crate::analysis::PairExplanation;
use crate::error::{Error, Result};
use crate::neural::write_checkpoint;

/// Mean and sample standard deviation over seeds of one (method, client)
/// cell, or of the per-seed client average when `client` is `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: Method,
    pub client: Option<usize>,
    pub accuracy: (f64, f64),
    pub loss: (f64, f64),
    /// Over the seeds where AUC is defined; `None` if it never is.
    pub auc: Option<(f64, f64)>,
}

/// Mean and (n - 1)-denominator standard deviation; a single value has
/// standard deviation 0.
fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Some((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Some((mean, var.sqrt()))
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Per-client rows for every method, followed by the method's client-average row.
pub fn summarize(report: &RunReport) -> Vec<SummaryRow> {
    let cfg = &report.config;
    let clients = cfg.clients.len();
    let mut rows = Vec::new();
    for &method in &cfg.methods {
        let cells = |client: usize| report.cells.iter().filter(move |c| c.method == method && c.client == client);
        for client in 0..clients {
            let acc: Vec<f64> = cells(client).map(|c| c.metrics.accuracy).collect();
            let loss: Vec<f64> = cells(client).map(|c| c.metrics.mean_loss).collect();
            let auc: Vec<f64> = cells(client).filter_map(|c| c.metrics.auc).collect();
            rows.push(SummaryRow {
                method,
                client: Some(client),
                accuracy: mean_std(&acc).expect("one cell per seed"),
                loss: mean_std(&loss).expect("one cell per seed"),
                auc: mean_std(&auc),
            });
        }
        let per_seed = |f: &dyn Fn(&super::Cell) -> Option<f64>| -> Vec<f64> {
            cfg.seeds
                .iter()
                .filter_map(|&seed| {
                    let values: Vec<f64> =
                        report.cells.iter().filter(|c| c.method == method && c.seed == seed).filter_map(f).collect();
                    (!values.is_empty()).then(|| mean(&values))
                })
                .collect()
        };
        rows.push(SummaryRow {
            method,
            client: None,
            accuracy: mean_std(&per_seed(&|c| Some(c.metrics.accuracy))).expect("seeds present"),
            loss: mean_std(&per_seed(&|c| Some(c.metrics.mean_loss))).expect("seeds present"),
            auc: mean_std(&per_seed(&|c| c.metrics.auc)),
        });
    }
    rows
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Files created so far; removed again if a later write fails.
struct Outputs {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Outputs {
    fn write(&mut self, name: &str, body: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        self.written.push(path.clone());
        let mut out = BufWriter::new(File::create(&path)?);
        body(&mut out)?;
        out.flush()?;
        Ok(())
    }

    fn cleanup(&self) {
        for path in &self.written {
            let _ = std::fs::remove_file(path);
        }
    }
}

#[derive(Serialize)]
struct ExplanationRecord<'a> {
    method: &'a str,
    client: usize,
    seed: u64,
    #[serde(flatten)]
    pair: &'a PairExplanation,
}

/// Writes all report files into `dir` and returns their paths. On failure
/// the files written so far are removed.
pub fn emit_reports(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::from(e).in_stage("emit"))?;
    let mut outputs = Outputs { dir: dir.to_path_buf(), written: Vec::new() };
    match write_all(report, &mut outputs) {
        Ok(()) => Ok(outputs.written),
        Err(e) => {
            outputs.cleanup();
            Err(e.in_stage("emit"))
        }
    }
}

fn write_all(report: &RunReport, outputs: &mut Outputs) -> Result<()> {
    outputs.write("metrics.csv", |out| {
        writeln!(out, "method,client,seed,accuracy,loss,auc")?;
        for c in &report.cells {
            writeln!(out, "{},{},{},{},{},{}", c.method, c.client, c.seed, c.metrics.accuracy, c.metrics.mean_loss, opt(c.metrics.auc))?;
        }
        Ok(())
    })?;

    outputs.write("summary.csv", |out| {
        writeln!(out, "method,client,accuracy_mean,accuracy_std,loss_mean,loss_std,auc_mean,auc_std")?;
        for row in summarize(report) {
            let client = row.client.map(|c| c.to_string()).unwrap_or_else(|| "all".into());
            writeln!(
                out,
                "{},{client},{:?},{:?},{:?},{:?},{},{}",
                row.method,
                row.accuracy.0,
                row.accuracy.1,
                row.loss.0,
                row.loss.1,
                row.auc.map(|a| format!("{:?}", a.0)).unwrap_or_default(),
                row.auc.map(|a| format!("{:?}", a.1)).unwrap_or_default(),
            )?;
        }
        Ok(())
    })?;

    outputs.write("fairness.csv", |out| {
        writeln!(out, "method,seed,client,tpr,fpr")?;
        for (method, seed, fairness) in &report.fairness {
            fairness.write_csv_rows(out, &format!("{method},{seed}"))?;
        }
        Ok(())
    })?;

    outputs.write("noniid.csv", |out| {
        writeln!(out, "seed,client_a,client_b,ks_resource_allocation")?;
        for r in &report.ks {
            writeln!(out, "{},{},{},{}", r.seed, r.a, r.b, r.ks)?;
        }
        Ok(())
    })?;

    if !report.explanations.is_empty() {
        outputs.write("importance.csv", |out| {
            writeln!(out, "method,client,feature,rank,mean_abs_phi")?;
            for e in &report.explanations {
                e.importance.write_csv_rows(out, &format!("{},{}", e.method, e.client))?;
            }
            Ok(())
        })?;
        let records: Vec<ExplanationRecord> = report
            .explanations
            .iter()
            .flat_map(|e| e.pairs.iter().map(move |pair| ExplanationRecord { method: e.method.name(), client: e.client, seed: e.seed, pair }))
            .collect();
        outputs.write("explanations.json", |out| {
            serde_json::to_writer_pretty(&mut *out, &records)?;
            writeln!(out)?;
            Ok(())
        })?;
        for e in &report.explanations {
            let title = format!("{} client {}: mean |SHAP value|", e.method, e.client);
            outputs.write(&format!("importance_client{}.svg", e.client), |out| e.importance.write_svg(out, &title))?;
        }
    }

    for (method, seed, client, classifier) in &report.models {
        outputs.write(&format!("models/{method}_seed{seed}_client{client}.model"), |out| {
            write_checkpoint(out, classifier)
        })?;
    }

    outputs.write("run_manifest.json", |out| {
        writeln!(out, "{}", report.config.to_json()?)?;
        Ok(())
    })?;
    Ok(())
}
