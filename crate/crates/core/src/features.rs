//! Pairwise neighborhood features for link prediction and the two-sample
//! Kolmogorov–Smirnov statistic used to compare client feature distributions.

use std::collections::HashSet;
use std::io::Write;

use crate::error::{Error, Result};
use crate::graph::{Pair, SlnGraph, TemporalPair};
use crate::scalar::Scalar;

pub const FEATURE_COUNT: usize = 6;

/// Column names, in feature order.
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "jaccard",
    "adamic_adar",
    "resource_allocation",
    "preferential_attachment",
    "cosine",
    "dice",
];

/// Index of the resource-allocation feature in [`FeatureVector::to_array`].
pub const RESOURCE_ALLOCATION: usize = 2;

/// The six topological similarity scores of a node pair.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FeatureVector<S> {
    pub jaccard: S,
    pub adamic_adar: S,
    pub resource_allocation: S,
    pub preferential_attachment: S,
    pub cosine: S,
    pub dice: S,
}

impl<S: Scalar> FeatureVector<S> {
    pub fn to_array(&self) -> [S; FEATURE_COUNT] {
        [
            self.jaccard,
            self.adamic_adar,
            self.resource_allocation,
            self.preferential_attachment,
            self.cosine,
            self.dice,
        ]
    }

    pub fn from_array(a: [S; FEATURE_COUNT]) -> Self {
        Self {
            jaccard: a[0],
            adamic_adar: a[1],
            resource_allocation: a[2],
            preferential_attachment: a[3],
            cosine: a[4],
            dice: a[5],
        }
    }
}

/// A labelled node pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairExample<S> {
    pub u: usize,
    pub v: usize,
    pub features: FeatureVector<S>,
    pub label: bool,
}

fn check_pair(g: &SlnGraph, u: usize, v: usize) -> Result<()> {
    g.check_node(u)?;
    g.check_node(v)?;
    if u == v {
        return Err(Error::SameNode(u));
    }
    Ok(())
}

/// Common neighbors of `u` and `v`, ascending.
fn common_neighbors<'g>(g: &'g SlnGraph, u: usize, v: usize) -> impl Iterator<Item = usize> + 'g {
    g.neighbors(u).intersection(g.neighbors(v)).copied()
}

fn ratio<S: Scalar>(num: S, den: S) -> S {
    if den == S::zero() {
        S::zero()
    } else {
        num / den
    }
}

pub fn jaccard<S: Scalar>(g: &SlnGraph, u: usize, v: usize) -> Result<S> {
    check_pair(g, u, v)?;
    let common = common_neighbors(g, u, v).count();
    let union = g.degree(u) + g.degree(v) - common;
    Ok(ratio(S::from_count(common), S::from_count(union)))
}

/// Sum of `1 / ln(deg)` over common neighbors. A common neighbor has degree
/// at least 2, so the logarithm is positive.
pub fn adamic_adar<S: Scalar>(g: &SlnGraph, u: usize, v: usize) -> Result<S> {
    check_pair(g, u, v)?;
    Ok(common_neighbors(g, u, v)
        .map(|n| S::from_count(g.degree(n)).ln().recip())
        .fold(S::zero(), |a, b| a + b))
}

pub fn resource_allocation<S: Scalar>(g: &SlnGraph, u: usize, v: usize) -> Result<S> {
    check_pair(g, u, v)?;
    Ok(common_neighbors(g, u, v)
        .map(|n| S::from_count(g.degree(n)).recip())
        .fold(S::zero(), |a, b| a + b))
}

pub fn preferential_attachment<S: Scalar>(g: &SlnGraph, u: usize, v: usize) -> Result<S> {
    check_pair(g, u, v)?;
    Ok(S::from_count(g.degree(u) * g.degree(v)))
}

pub fn cosine<S: Scalar>(g: &SlnGraph, u: usize, v: usize) -> Result<S> {
    check_pair(g, u, v)?;
    let common = common_neighbors(g, u, v).count();
    let den = S::from_count(g.degree(u) * g.degree(v)).sqrt();
    Ok(ratio(S::from_count(common), den))
}

pub fn dice<S: Scalar>(g: &SlnGraph, u: usize, v: usize) -> Result<S> {
    check_pair(g, u, v)?;
    let common = common_neighbors(g, u, v).count();
    Ok(ratio(S::from_count(2 * common), S::from_count(g.degree(u) + g.degree(v))))
}

/// All six features of one pair in a single neighborhood pass.
pub fn pair_features<S: Scalar>(g: &SlnGraph, u: usize, v: usize) -> Result<FeatureVector<S>> {
    check_pair(g, u, v)?;
    let (du, dv) = (g.degree(u), g.degree(v));
    let mut common = 0usize;
    let mut aa = S::zero();
    let mut ra = S::zero();
    for n in common_neighbors(g, u, v) {
        let dn = S::from_count(g.degree(n));
        common += 1;
        aa = aa + dn.ln().recip();
        ra = ra + dn.recip();
    }
    let c = S::from_count(common);
    Ok(FeatureVector {
        jaccard: ratio(c, S::from_count(du + dv - common)),
        adamic_adar: aa,
        resource_allocation: ra,
        preferential_attachment: S::from_count(du * dv),
        cosine: ratio(c, S::from_count(du * dv).sqrt()),
        dice: ratio(S::from_count(2 * common), S::from_count(du + dv)),
    })
}

/// Features from the earlier snapshot, labels from the later one, in input
/// order.
pub fn build_examples<S: Scalar>(tp: &TemporalPair, pairs: &[Pair]) -> Result<Vec<PairExample<S>>> {
    let universe: HashSet<Pair> = tp.pair_universe.iter().copied().collect();
    pairs
        .iter()
        .map(|&(a, b)| {
            let (u, v) = (a.min(b), a.max(b));
            if !universe.contains(&(u, v)) {
                return Err(Error::PairNotInUniverse(a, b));
            }
            Ok(PairExample {
                u,
                v,
                features: pair_features(&tp.graph_prev, u, v)?,
                label: tp.graph_now.has_edge(u, v),
            })
        })
        .collect()
}

/// Writes `u,v,<six features>,label` rows with a header line.
pub fn write_examples_csv<S: Scalar>(mut out: impl Write, examples: &[PairExample<S>]) -> Result<()> {
    writeln!(out, "u,v,{},label", FEATURE_NAMES.join(","))?;
    for ex in examples {
        write!(out, "{},{}", ex.u, ex.v)?;
        for value in ex.features.to_array() {
            write!(out, ",{value}")?;
        }
        writeln!(out, ",{}", u8::from(ex.label))?;
    }
    Ok(())
}

/// Parses the output of [`write_examples_csv`].
pub fn read_examples_csv<S: Scalar + std::str::FromStr>(text: &str) -> Result<Vec<PairExample<S>>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, header)) if header.trim() == format!("u,v,{},label", FEATURE_NAMES.join(",")) => {}
        _ => return Err(Error::Parse { line: 1, message: "missing example CSV header".into() }),
    }
    lines
        .map(|(i, line)| {
            let err = |message: &str| Error::Parse { line: i + 1, message: message.into() };
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != FEATURE_COUNT + 3 {
                return Err(err("expected u, v, six features and a label"));
            }
            let node = |f: &str| f.parse::<usize>().map_err(|_| err("bad node index"));
            let mut values = [S::zero(); FEATURE_COUNT];
            for (v, f) in values.iter_mut().zip(&fields[2..2 + FEATURE_COUNT]) {
                *v = f.parse().map_err(|_| err("bad feature value"))?;
            }
            let label = match fields[FEATURE_COUNT + 2] {
                "1" => true,
                "0" => false,
                _ => return Err(err("label must be 0 or 1")),
            };
            Ok(PairExample { u: node(fields[0])?, v: node(fields[1])?, features: FeatureVector::from_array(values), label })
        })
        .collect()
}

/// Two-sample Kolmogorov–Smirnov statistic: the largest gap between the two
/// right-continuous empirical CDFs, evaluated at every pooled sample point.
pub fn ks_statistic<S: Scalar>(a: &[S], b: &[S]) -> Result<S> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("KS sample"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    let cmp = |x: &S, y: &S| x.partial_cmp(y).expect("KS samples must not contain NaN");
    a.sort_by(cmp);
    b.sort_by(cmp);
    let (na, nb) = (S::from_count(a.len()), S::from_count(b.len()));

    let (mut i, mut j) = (0, 0);
    let mut sup = S::zero();
    while i < a.len() || j < b.len() {
        // Advance past every copy of the next pooled value in both samples.
        let x = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        let gap = (S::from_count(i) / na - S::from_count(j) / nb).abs();
        sup = sup.max(gap);
    }
    Ok(sup)
}

/// Per-feature z-scoring fitted on a training split.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer<S> {
    pub mean: [S; FEATURE_COUNT],
    pub std: [S; FEATURE_COUNT],
}

impl<S: Scalar> Standardizer<S> {
    /// Mean and population standard deviation of each feature. Constant
    /// features get unit scale.
    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a FeatureVector<S>>) -> Result<Self> {
        let rows: Vec<[S; FEATURE_COUNT]> = rows.into_iter().map(FeatureVector::to_array).collect();
        if rows.is_empty() {
            return Err(Error::Empty("standardizer training rows"));
        }
        let n = S::from_count(rows.len());
        let mut mean = [S::zero(); FEATURE_COUNT];
        for row in &rows {
            for (m, &x) in mean.iter_mut().zip(row) {
                *m = *m + x;
            }
        }
        mean.iter_mut().for_each(|m| *m = *m / n);
        let mut std = [S::zero(); FEATURE_COUNT];
        for row in &rows {
            for ((s, &x), &m) in std.iter_mut().zip(row).zip(&mean) {
                *s = *s + (x - m) * (x - m);
            }
        }
        for s in &mut std {
            *s = (*s / n).sqrt();
            if !(*s > S::zero()) {
                *s = S::one();
            }
        }
        Ok(Self { mean, std })
    }

    /// No-op scaling.
    pub fn identity() -> Self {
        Self { mean: [S::zero(); FEATURE_COUNT], std: [S::one(); FEATURE_COUNT] }
    }

    pub fn apply(&self, x: &FeatureVector<S>) -> [S; FEATURE_COUNT] {
        self.apply_array(&x.to_array())
    }

    pub fn apply_array(&self, x: &[S; FEATURE_COUNT]) -> [S; FEATURE_COUNT] {
        std::array::from_fn(|j| (x[j] - self.mean[j]) / self.std[j])
    }
}
