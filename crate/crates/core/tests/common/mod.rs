//! Independent brute-force oracles shared by the integration test targets.
#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::Rng as _;
use slnfed::graph::SlnGraph;
use slnfed::neural::{forward, gradient, ModelParams, Sample};
use slnfed::rng;

/// Random simple graph on `n` nodes with edge probability `p`.
pub fn random_graph(seed: u64, n: usize, p: f64) -> SlnGraph {
    let mut r = rng::stream(seed, 900);
    let edges: Vec<(usize, usize)> =
        (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).filter(|_| r.gen::<f64>() < p).collect();
    SlnGraph::from_edges(n, edges).unwrap()
}

/// The six features from explicit neighbor sets, written out directly from
/// their definitions.
pub fn brute_features(g: &SlnGraph, u: usize, v: usize) -> [f64; 6] {
    let nbrs = |x: usize| -> BTreeSet<usize> { (0..g.node_count()).filter(|&y| g.has_edge(x, y)).collect() };
    let (nu, nv) = (nbrs(u), nbrs(v));
    let common: Vec<usize> = nu.intersection(&nv).copied().collect();
    let union = nu.union(&nv).count() as f64;
    let (du, dv, c) = (nu.len() as f64, nv.len() as f64, common.len() as f64);
    let div = |a: f64, b: f64| if b == 0.0 { 0.0 } else { a / b };
    let aa: f64 = common.iter().map(|&w| 1.0 / (nbrs(w).len() as f64).ln()).sum();
    let ra: f64 = common.iter().map(|&w| 1.0 / nbrs(w).len() as f64).sum();
    [div(c, union), aa, ra, du * dv, div(c, (du * dv).sqrt()), div(2.0 * c, du + dv)]
}

/// AUC as the share of correctly ordered (positive, negative) pairs, ties
/// counting half, by explicit enumeration of all pairs.
pub fn brute_auc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let mut doubled = 0u128;
    let (mut p, mut n) = (0u128, 0u128);
    for (i, &yi) in labels.iter().enumerate() {
        if yi {
            p += 1;
        } else {
            n += 1;
        }
        if !yi {
            continue;
        }
        for (j, &yj) in labels.iter().enumerate() {
            if yj {
                continue;
            }
            doubled += if scores[i] > scores[j] {
                2
            } else if scores[i] == scores[j] {
                1
            } else {
                0
            };
        }
    }
    (p > 0 && n > 0).then(|| (doubled as f64 / 2.0) / ((p * n) as f64))
}

/// Shapley values by averaging marginal contributions over all 720
/// orderings of the six features.
pub fn permutation_shapley(value: &dyn Fn(u32) -> f64) -> [f64; 6] {
    fn permutations(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
        if k == items.len() {
            out.push(items.clone());
            return;
        }
        for i in k..items.len() {
            items.swap(k, i);
            permutations(items, k + 1, out);
            items.swap(k, i);
        }
    }
    let mut perms = Vec::new();
    permutations(&mut (0..6).collect(), 0, &mut perms);
    let mut phi = [0.0; 6];
    for perm in &perms {
        let mut mask = 0u32;
        for &f in perm {
            let before = value(mask);
            mask |= 1 << f;
            phi[f] += value(mask) - before;
        }
    }
    phi.map(|p| p / perms.len() as f64)
}

/// Coalition value under marginal masking, computed independently of the
/// library: features in `mask` come from `x`, the rest from each background row.
pub fn masked_value(f: &dyn Fn(&[f64; 6]) -> f64, x: &[f64; 6], background: &[[f64; 6]], mask: u32) -> f64 {
    background
        .iter()
        .map(|row| {
            let z: [f64; 6] = std::array::from_fn(|i| if mask & (1 << i) != 0 { x[i] } else { row[i] });
            f(&z)
        })
        .sum::<f64>()
        / background.len() as f64
}

/// Random samples with six inputs and a noisy linear label.
pub fn random_batch(seed: u64, n: usize) -> Vec<Sample<f64>> {
    let mut r = rng::stream(seed, 901);
    (0..n)
        .map(|_| {
            let x: Vec<f64> = (0..6).map(|_| r.gen_range(-1.5..1.5)).collect();
            let label = x[0] - 0.5 * x[3] + 0.4 * r.gen_range(-1.0..1.0) > 0.0;
            Sample::new(x, label)
        })
        .collect()
}

/// Relative error of backprop against central differences of the mean loss.
pub fn gradient_check(params: &ModelParams<f64>, batch: &[Sample<f64>], step: f64) -> f64 {
    let loss = |p: &ModelParams<f64>| slnfed::neural::batch_loss(p, batch).unwrap();
    let analytic: Vec<f64> = gradient(params, batch).unwrap().values().copied().collect();
    let mut numeric = Vec::with_capacity(analytic.len());
    for i in 0..analytic.len() {
        let mut plus = params.clone();
        let mut minus = params.clone();
        *plus.values_mut().nth(i).unwrap() += step;
        *minus.values_mut().nth(i).unwrap() -= step;
        numeric.push((loss(&plus) - loss(&minus)) / (2.0 * step));
    }
    let diff: f64 = analytic.iter().zip(&numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
    let norm: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt() + numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
    diff / norm.max(f64::MIN_POSITIVE)
}

/// Model output as a plain function of six inputs.
pub fn model_fn(params: &ModelParams<f64>) -> impl Fn(&[f64; 6]) -> f64 + Sync + '_ {
    move |z| forward(params, z).unwrap()
}
