//! Social learning network graphs: ingestion, temporal snapshots, splits and
//! a stochastic-block-model generator.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;

use rand::seq::{index, SliceRandom};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::round_half_up;

/// An unordered node pair stored with `u < v`.
pub type Pair = (usize, usize);

const TEMPORAL_STREAM: u64 = 0;
const TRAIN_TEST_STREAM: u64 = 1;
const GENERATOR_STREAM: u64 = 2;
const UNIVERSE_STREAM: u64 = 3;

/// Undirected simple graph over dense node indices.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SlnGraph {
    adjacency: Vec<BTreeSet<usize>>,
    labels: Option<Vec<String>>,
}

impl SlnGraph {
    /// Graph with `node_count` isolated nodes.
    pub fn new(node_count: usize) -> Self {
        Self { adjacency: vec![BTreeSet::new(); node_count], labels: None }
    }

    /// Builds a graph from index pairs. Duplicates collapse; self-loops and
    /// out-of-range indices are rejected.
    pub fn from_edges(node_count: usize, edges: impl IntoIterator<Item = Pair>) -> Result<Self> {
        let mut graph = Self::new(node_count);
        for (u, v) in edges {
            graph.add_edge(u, v)?;
        }
        Ok(graph)
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(BTreeSet::len).sum::<usize>() / 2
    }

    /// External id of each node, when the graph was loaded from text.
    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn label(&self, node: usize) -> String {
        match &self.labels {
            Some(labels) => labels[node].clone(),
            None => node.to_string(),
        }
    }

    pub fn check_node(&self, node: usize) -> Result<()> {
        if node < self.node_count() {
            Ok(())
        } else {
            Err(Error::NodeOutOfRange { node, node_count: self.node_count() })
        }
    }

    pub fn add_edge(&mut self, u: usize, v: usize) -> Result<()> {
        self.check_node(u)?;
        self.check_node(v)?;
        if u == v {
            return Err(Error::SameNode(u));
        }
        self.adjacency[u].insert(v);
        self.adjacency[v].insert(u);
        Ok(())
    }

    pub fn remove_edge(&mut self, u: usize, v: usize) -> bool {
        let removed = self.adjacency[u].remove(&v);
        self.adjacency[v].remove(&u);
        removed
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency.get(u).is_some_and(|n| n.contains(&v))
    }

    pub fn neighbors(&self, node: usize) -> &BTreeSet<usize> {
        &self.adjacency[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adjacency[node].len()
    }

    /// All edges as `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> Vec<Pair> {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(u, ns)| ns.range(u + 1..).map(move |&v| (u, v)))
            .collect()
    }

    /// Serializes as sorted `u,v` lines over dense indices.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for (u, v) in self.edges() {
            let _ = writeln!(out, "{u},{v}");
        }
        out
    }
}

/// Parses an edge list: one `u<sep>v` per line with `sep` a comma or
/// whitespace. Blank lines and lines starting with `#` are skipped. Tokens
/// map to dense indices in first-seen order.
pub fn load_edge_list(text: &str) -> Result<SlnGraph> {
    let mut index_of: HashMap<&str, usize> = HashMap::new();
    let mut labels: Vec<String> = Vec::new();
    let mut edges = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .collect();
        if tokens.len() != 2 {
            return Err(Error::Parse {
                line: lineno + 1,
                message: format!("expected two node ids, found {}", tokens.len()),
            });
        }
        if tokens[0] == tokens[1] {
            return Err(Error::SelfLoop { line: lineno + 1, node: tokens[0].to_string() });
        }
        let [u, v] = [tokens[0], tokens[1]].map(|token| {
            let next = labels.len();
            *index_of.entry(token).or_insert_with(|| {
                labels.push(token.to_string());
                next
            })
        });
        edges.push((u, v));
    }

    let mut graph = SlnGraph::from_edges(labels.len(), edges)?;
    graph.labels = Some(labels);
    Ok(graph)
}

/// Fractions and seed of the data preparation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub removal_fraction: f64,
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { removal_fraction: 0.2, train_fraction: 0.8, seed: 0 }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, value) in
            [("removal_fraction", self.removal_fraction), ("train_fraction", self.train_fraction)]
        {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::invalid(format!("{name} = {value} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Snapshots at t-1 and t of the same network.
#[derive(Debug, Clone)]
pub struct TemporalPair {
    pub graph_prev: SlnGraph,
    pub graph_now: SlnGraph,
    pub pair_universe: Vec<Pair>,
    pub removed_pairs: Vec<Pair>,
}

fn normalize_pair(graph: &SlnGraph, (a, b): Pair) -> Result<Pair> {
    graph.check_node(a)?;
    graph.check_node(b)?;
    match a.cmp(&b) {
        std::cmp::Ordering::Less => Ok((a, b)),
        std::cmp::Ordering::Greater => Ok((b, a)),
        std::cmp::Ordering::Equal => Err(Error::SameNode(a)),
    }
}

/// Emulates the earlier snapshot: a seeded selection of
/// `round(removal_fraction * |universe|)` pairs has its links deleted.
pub fn temporal_split(
    graph_now: &SlnGraph,
    pair_universe: &[Pair],
    spec: &SplitSpec,
) -> Result<TemporalPair> {
    spec.validate()?;
    let universe = pair_universe
        .iter()
        .map(|&p| normalize_pair(graph_now, p))
        .collect::<Result<Vec<_>>>()?;

    let take = round_half_up(spec.removal_fraction * universe.len() as f64).min(universe.len());
    let mut order: Vec<usize> = (0..universe.len()).collect();
    order.shuffle(&mut rng::stream(spec.seed, TEMPORAL_STREAM));
    let mut selected: Vec<usize> = order[..take].to_vec();
    selected.sort_unstable();

    let mut graph_prev = graph_now.clone();
    let removed_pairs: Vec<Pair> = selected.iter().map(|&i| universe[i]).collect();
    for &(u, v) in &removed_pairs {
        graph_prev.remove_edge(u, v);
    }

    Ok(TemporalPair { graph_prev, graph_now: graph_now.clone(), pair_universe: universe, removed_pairs })
}

/// Seeded shuffle followed by a prefix split of `round(train_fraction * n)`.
pub fn train_test_split<T: Clone>(
    examples: &[T],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<T>, Vec<T>)> {
    if examples.is_empty() {
        return Err(Error::Empty("example list"));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(format!("train_fraction = {train_fraction} outside (0, 1)")));
    }
    let n_train = round_half_up(train_fraction * examples.len() as f64).min(examples.len());
    let mut order: Vec<usize> = (0..examples.len()).collect();
    order.shuffle(&mut rng::stream(seed, TRAIN_TEST_STREAM));
    let train = order[..n_train].iter().map(|&i| examples[i].clone()).collect();
    let test = order[n_train..].iter().map(|&i| examples[i].clone()).collect();
    Ok((train, test))
}

/// Parameters of the stochastic block model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SbmSpec {
    pub nodes: usize,
    pub communities: usize,
    pub intra_p: f64,
    pub inter_p: f64,
    pub seed: u64,
}

/// Stochastic block model: node `i` belongs to community `i % n_communities`
/// and each pair links independently with `intra_p` or `inter_p`.
pub fn generate_synthetic(spec: &SbmSpec) -> Result<SlnGraph> {
    let SbmSpec { nodes, communities, intra_p, inter_p, seed } = *spec;
    if communities == 0 {
        return Err(Error::invalid("n_communities must be at least 1"));
    }
    if !(0.0..=1.0).contains(&inter_p) || !(0.0..=1.0).contains(&intra_p) || inter_p > intra_p {
        return Err(Error::invalid(format!(
            "need 0 <= inter_p <= intra_p <= 1, got inter_p = {inter_p}, intra_p = {intra_p}"
        )));
    }
    let mut rng = rng::stream(seed, GENERATOR_STREAM);
    let mut graph = SlnGraph::new(nodes);
    for u in 0..nodes {
        for v in u + 1..nodes {
            let p = if u % communities == v % communities { intra_p } else { inter_p };
            if rng.gen::<f64>() < p {
                graph.add_edge(u, v)?;
            }
        }
    }
    Ok(graph)
}

/// Every linked pair plus `round(ratio * links)` unlinked pairs drawn
/// uniformly without replacement. Sorted lexicographically.
pub fn sample_pair_universe(
    graph: &SlnGraph,
    negatives_per_positive: f64,
    seed: u64,
) -> Result<Vec<Pair>> {
    if !(negatives_per_positive >= 0.0) || !negatives_per_positive.is_finite() {
        return Err(Error::invalid(format!(
            "negatives_per_positive = {negatives_per_positive} must be non-negative"
        )));
    }
    let positives = graph.edges();
    let requested = round_half_up(negatives_per_positive * positives.len() as f64);
    let n = graph.node_count();
    let available = n * n.saturating_sub(1) / 2 - positives.len();
    if requested > available {
        return Err(Error::InsufficientNegatives { requested, available });
    }

    let mut universe = positives;
    if requested > 0 {
        let unlinked: Vec<Pair> = (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
            .filter(|&(u, v)| !graph.has_edge(u, v))
            .collect();
        let mut rng = rng::stream(seed, UNIVERSE_STREAM);
        universe.extend(index::sample(&mut rng, unlinked.len(), requested).into_iter().map(|i| unlinked[i]));
    }
    universe.sort_unstable();
    Ok(universe)
}

/// Checks symmetry, absence of self-loops and index bounds.
pub fn is_well_formed(graph: &SlnGraph) -> bool {
    let n = graph.node_count();
    (0..n).all(|u| {
        graph
            .neighbors(u)
            .iter()
            .all(|&v| v < n && v != u && graph.neighbors(v).contains(&u))
    })
}

/// Edge-by-edge containment of `inner` in `outer`.
pub fn edges_contained(inner: &SlnGraph, outer: &SlnGraph) -> bool {
    let outer: HashSet<Pair> = outer.edges().into_iter().collect();
    inner.edges().iter().all(|e| outer.contains(e))
}
