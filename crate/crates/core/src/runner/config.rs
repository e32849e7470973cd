//! Experiment configuration and its plain-text grammar.
//!
//! ```text
//! # comment; blank lines ignored
//! key = value                 # top-level keys precede any section
//! [split]                     # removal_fraction, train_fraction
//! [client]                    # repeated, one per client, in client order
//! source = synthetic          # with nodes, communities, intra_p, inter_p, seed
//! source = edge_list          # with path (relative to the config file)
//! [train]                     # overrides applied to every method
//! [train.<method>]            # overrides for one method
//! [explain]                   # method, pairs, background
//! ```
//!
//! Values are JSON scalars (`0.01`, `true`, `"text"`) or bare words; a value
//! containing commas is a list (`seeds = 1, 2, 3`). Top-level keys are
//! `seeds`, `methods`, `output`, `parallel`, `negatives_per_positive`,
//! `hidden`, `activation` and `save_models`. Train keys are the field names
//! of [`TrainConfig`], starting from each method's own defaults.
//!
//! A `.json` file is read as a serialized [`ExperimentConfig`], which is the
//! format of the emitted run manifest.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::graph::{SbmSpec, SplitSpec};
use crate::neural::{Activation, TrainConfig, DEFAULT_HIDDEN};

/// A training regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Centralized,
    Fedavg,
    FedavgFt,
    PerfedavgHf,
    Fedala,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Centralized, Method::Fedavg, Method::FedavgFt, Method::PerfedavgHf, Method::Fedala];

    pub fn name(self) -> &'static str {
        match self {
            Method::Centralized => "centralized",
            Method::Fedavg => "fedavg",
            Method::FedavgFt => "fedavg_ft",
            Method::PerfedavgHf => "perfedavg_hf",
            Method::Fedala => "fedala",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == name)
    }

    /// The method's default hyperparameters.
    pub fn default_train(self) -> TrainConfig {
        match self {
            Method::Centralized => TrainConfig::centralized(),
            Method::Fedavg => TrainConfig::fedavg(),
            Method::FedavgFt => TrainConfig::fedavg_ft(),
            Method::PerfedavgHf => TrainConfig::perfedavg_hf(),
            Method::Fedala => TrainConfig::fedala(),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Where one client's network comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum ClientSource {
    EdgeList { path: PathBuf },
    Synthetic(SbmSpec),
}

/// Shapley explanation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainSpec {
    /// Model whose predictions are explained.
    pub method: Method,
    /// Test pairs explained per client (taken in split order).
    pub pairs: usize,
    /// Training rows per client in the background set.
    pub background: usize,
}

impl Default for ExplainSpec {
    fn default() -> Self {
        Self { method: Method::Fedala, pairs: 20, background: 100 }
    }
}

/// Everything that determines a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub clients: Vec<ClientSource>,
    /// Unlinked pairs sampled per link into each pair universe.
    #[serde(default = "default_ratio")]
    pub negatives_per_positive: f64,
    /// Split fractions. The per-client split seed is derived from the run
    /// seed; `split.seed` is added to it as an offset.
    #[serde(default)]
    pub split: SplitSpec,
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    #[serde(default)]
    pub activation: Activation,
    pub methods: Vec<Method>,
    /// Resolved hyperparameters for every requested method.
    #[serde(default)]
    pub train: BTreeMap<Method, TrainConfig>,
    pub seeds: Vec<u64>,
    pub output: PathBuf,
    /// Train clients concurrently. Results do not depend on it.
    #[serde(default)]
    pub parallel: bool,
    #[serde(default)]
    pub explain: Option<ExplainSpec>,
    /// Write every per-client model as a checkpoint.
    #[serde(default)]
    pub save_models: bool,
}

fn default_ratio() -> f64 {
    1.0
}

fn default_hidden() -> Vec<usize> {
    DEFAULT_HIDDEN.to_vec()
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.clients.is_empty() {
            return Err(Error::Config("at least one client is required".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("the method set is empty".into()));
        }
        if !(self.negatives_per_positive >= 0.0 && self.negatives_per_positive.is_finite()) {
            return Err(Error::Config("negatives_per_positive must be non-negative".into()));
        }
        if !(self.split.train_fraction > 0.0 && self.split.train_fraction < 1.0) {
            return Err(Error::Config("train_fraction must lie in (0, 1)".into()));
        }
        self.split.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.hidden.contains(&0) {
            return Err(Error::Config("hidden layer widths must be positive".into()));
        }
        for method in &self.methods {
            let cfg = self.train_config(*method)?;
            cfg.validate()?;
            if *method == Method::Fedala && cfg.ala_top_layers > self.hidden.len() + 1 {
                return Err(Error::Config(format!(
                    "ala_top_layers = {} exceeds the {} layers of the model",
                    cfg.ala_top_layers,
                    self.hidden.len() + 1
                )));
            }
        }
        Ok(())
    }

    /// Hyperparameters of `method`.
    pub fn train_config(&self, method: Method) -> Result<&TrainConfig> {
        self.train.get(&method).ok_or_else(|| Error::Config(format!("no training settings for {method}")))
    }

    /// Layer widths from input to output.
    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = vec![crate::features::FEATURE_COUNT];
        dims.extend(&self.hidden);
        dims.push(1);
        dims
    }

    /// Reads either grammar; relative edge-list paths resolve against the
    /// file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let mut cfg = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text)?
        } else {
            parse_config(&text)?
        };
        for client in &mut cfg.clients {
            if let ClientSource::EdgeList { path } = client {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn parse_value(raw: &str) -> Value {
    let raw = raw.trim();
    if raw.contains(',') && !raw.starts_with('[') && !raw.starts_with('"') {
        return Value::Array(raw.split(',').map(|item| parse_value(item.trim())).collect());
    }
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

fn as_list(value: Value) -> Value {
    match value {
        Value::Array(_) => value,
        other => Value::Array(vec![other]),
    }
}

enum Section {
    Root,
    Split,
    Client(usize),
    Train(Option<Method>),
    Explain,
}

/// Parses the sectioned key=value grammar into a resolved configuration.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut root = Map::new();
    let mut split = Map::new();
    let mut clients: Vec<Map<String, Value>> = Vec::new();
    let mut shared_train = Map::new();
    let mut method_train: BTreeMap<Method, Map<String, Value>> = BTreeMap::new();
    let mut explain: Option<Map<String, Value>> = None;
    let mut section = Section::Root;

    let err = |line: usize, message: String| Error::Parse { line, message };
    for (index, raw) in text.lines().enumerate() {
        let line_no = index + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = match name.trim() {
                "split" => Section::Split,
                "client" => {
                    clients.push(Map::new());
                    Section::Client(clients.len() - 1)
                }
                "train" => Section::Train(None),
                "explain" => {
                    explain.get_or_insert_with(Map::new);
                    Section::Explain
                }
                other => match other.strip_prefix("train.").map(Method::from_name) {
                    Some(Some(m)) => Section::Train(Some(m)),
                    _ => return Err(err(line_no, format!("unknown section [{other}]"))),
                },
            };
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| err(line_no, format!("expected `key = value`, found `{line}`")))?;
        let (key, mut value) = (key.trim().to_string(), parse_value(value));
        let target = match &section {
            Section::Root => {
                if matches!(key.as_str(), "seeds" | "methods" | "hidden") {
                    value = as_list(value);
                }
                if key == "output" {
                    value = Value::String(value.as_str().map(str::to_string).unwrap_or_else(|| value.to_string()));
                }
                &mut root
            }
            Section::Split => &mut split,
            Section::Client(i) => &mut clients[*i],
            Section::Train(None) => &mut shared_train,
            Section::Train(Some(m)) => method_train.entry(*m).or_default(),
            Section::Explain => explain.as_mut().expect("explain section opened"),
        };
        if target.insert(key.clone(), value).is_some() {
            return Err(err(line_no, format!("duplicate key `{key}`")));
        }
    }

    let client_values = clients
        .into_iter()
        .enumerate()
        .map(|(i, mut c)| {
            if c.get("source").and_then(Value::as_str) == Some("synthetic") {
                c.entry("seed").or_insert(Value::from(i as u64));
            }
            if let Some(Value::Number(n)) = c.get("path") {
                let s = n.to_string();
                c.insert("path".into(), Value::String(s));
            }
            Value::Object(c)
        })
        .collect();
    root.insert("clients".into(), Value::Array(client_values));
    if !split.is_empty() {
        let mut full = serde_json::to_value(SplitSpec::default())?;
        full.as_object_mut().expect("object").extend(split);
        root.insert("split".into(), full);
    }
    if let Some(explain) = explain {
        root.insert("explain".into(), Value::Object(explain));
    }

    let methods: Vec<Method> = match root.get("methods") {
        Some(v) => serde_json::from_value(v.clone()).map_err(|e| Error::Config(format!("methods: {e}")))?,
        None => Vec::new(),
    };
    if let Some(m) = method_train.keys().find(|m| !methods.contains(m)) {
        return Err(Error::Config(format!("[train.{m}] given but {m} is not in methods")));
    }
    let mut train = Map::new();
    for &method in &methods {
        let mut resolved = serde_json::to_value(method.default_train())?;
        let obj = resolved.as_object_mut().expect("object");
        for (k, v) in shared_train.iter().chain(method_train.get(&method).into_iter().flatten()) {
            if !obj.contains_key(k) {
                return Err(Error::Config(format!("unknown training key `{k}`")));
            }
            obj.insert(k.clone(), v.clone());
        }
        train.insert(method.name().into(), resolved);
    }
    root.insert("train".into(), Value::Object(train));

    serde_json::from_value(Value::Object(root)).map_err(|e| Error::Config(e.to_string()))
}
