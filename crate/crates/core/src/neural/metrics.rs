use super::{bce_loss, forward, ModelParams, Sample};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Confusion counts at a fixed threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    /// Counts with `score >= threshold` classified positive.
    pub fn count<S: Scalar>(scores: &[S], labels: &[bool], threshold: S) -> Self {
        let mut c = Confusion::default();
        for (&s, &y) in scores.iter().zip(labels) {
            match (s >= threshold, y) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Accuracy, loss and AUC of a model on one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport<S> {
    pub accuracy: S,
    pub mean_loss: S,
    /// `None` when the data holds a single class.
    pub auc: Option<S>,
    pub counts: Confusion,
}

/// Area under the ROC curve by pair counting: the share of
/// (positive, negative) pairs ranked correctly, ties counted half.
///
/// Runs in `O(n log n)`: scores are sorted once and each group of tied scores
/// contributes `pos * neg_below + pos * neg_tied / 2`. Counts are kept as
/// integers and divided once at the end.
pub fn auc<S: Scalar>(scores: &[S], labels: &[bool]) -> Result<S> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: scores.len(), actual: labels.len() });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("scores must not contain NaN"));

    let (mut negatives_below, mut doubled_wins) = (0u128, 0u128);
    let (mut positives, mut negatives) = (0u128, 0u128);
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let (mut pos, mut neg) = (0u128, 0u128);
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if labels[order[j]] {
                pos += 1;
            } else {
                neg += 1;
            }
            j += 1;
        }
        doubled_wins += 2 * pos * negatives_below + pos * neg;
        negatives_below += neg;
        positives += pos;
        negatives += neg;
        i = j;
    }
    if positives == 0 || negatives == 0 {
        return Err(Error::UndefinedAuc);
    }
    let wins = S::from_u128(doubled_wins).unwrap() / S::lit(2.0);
    Ok(wins / S::from_u128(positives * negatives).unwrap())
}

/// Evaluates at threshold 0.5 with ties classified positive.
pub fn evaluate<S: Scalar>(params: &ModelParams<S>, data: &[Sample<S>]) -> Result<MetricsReport<S>> {
    if data.is_empty() {
        return Err(Error::Empty("evaluation data"));
    }
    let scores = data.iter().map(|s| forward(params, &s.x)).collect::<Result<Vec<S>>>()?;
    let labels: Vec<bool> = data.iter().map(|s| s.label).collect();
    Ok(report_from_scores(&scores, &labels))
}

/// Metrics from precomputed scores.
pub fn report_from_scores<S: Scalar>(scores: &[S], labels: &[bool]) -> MetricsReport<S> {
    let counts = Confusion::count(scores, labels, S::lit(0.5));
    let n = S::from_count(scores.len());
    let loss = scores.iter().zip(labels).fold(S::zero(), |acc, (&p, &y)| acc + bce_loss(p, y));
    MetricsReport {
        accuracy: S::from_count(counts.tp + counts.tn) / n,
        mean_loss: loss / n,
        auc: auc(scores, labels).ok(),
        counts,
    }
}
