//! Cross-client fairness, paired significance testing and exact Shapley
//! attribution of the six link features.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::features::{FEATURE_COUNT, FEATURE_NAMES};
use crate::neural::{Classifier, Confusion};
use crate::scalar::{self, Scalar};

/// True- and false-positive rates of one client. A rate is `None` when the
/// client's data lacks the class it conditions on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates<S> {
    pub tpr: Option<S>,
    pub fpr: Option<S>,
}

impl<S: Scalar> Rates<S> {
    pub fn from_confusion(c: &Confusion) -> Self {
        let ratio = |num: usize, other: usize| (num + other > 0).then(|| S::from_count(num) / S::from_count(num + other));
        Self { tpr: ratio(c.tp, c.fn_), fpr: ratio(c.fp, c.tn) }
    }
}

/// Rates at `threshold`, scores equal to the threshold counting as positive.
pub fn confusion_rates<S: Scalar>(scores: &[S], labels: &[bool], threshold: S) -> Result<Rates<S>> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: scores.len(), actual: labels.len() });
    }
    Ok(Rates::from_confusion(&Confusion::count(scores, labels, threshold)))
}

/// Per-client rates and their spread. A range is taken over the clients
/// whose rate is defined and is `None` if no client defines it.
#[derive(Debug, Clone, PartialEq)]
pub struct FairnessReport<S> {
    pub rates: Vec<Rates<S>>,
    /// Equal opportunity difference: max minus min TPR.
    pub tpr_range: Option<S>,
    pub fpr_range: Option<S>,
}

fn range<S: Scalar>(values: impl Iterator<Item = S>) -> Option<S> {
    values.fold(None, |acc, v| match acc {
        None => Some((v, v)),
        Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
    })
    .map(|(lo, hi)| hi - lo)
}

pub fn fairness_report<S: Scalar>(rates: &[Rates<S>]) -> FairnessReport<S> {
    FairnessReport {
        rates: rates.to_vec(),
        tpr_range: range(rates.iter().filter_map(|r| r.tpr)),
        fpr_range: range(rates.iter().filter_map(|r| r.fpr)),
    }
}

impl<S: Scalar> FairnessReport<S> {
    /// `method,client,tpr,fpr` rows followed by `method,range,...` with the
    /// spreads. Undefined values are left empty.
    pub fn write_csv_rows(&self, out: &mut impl Write, method: &str) -> Result<()> {
        let cell = |v: Option<S>| v.map(|v| v.to_string()).unwrap_or_default();
        for (client, r) in self.rates.iter().enumerate() {
            writeln!(out, "{method},{client},{},{}", cell(r.tpr), cell(r.fpr))?;
        }
        writeln!(out, "{method},range,{},{}", cell(self.tpr_range), cell(self.fpr_range))?;
        Ok(())
    }
}

/// Two-sided critical values of Student's t for significance levels
/// 0.10, 0.05, 0.01 and 0.001, indexed by degrees of freedom 1..=30.
/// Computed with `scipy.stats.t.ppf(1 - alpha / 2, dof)`.
pub const T_LEVELS: [f64; 4] = [0.10, 0.05, 0.01, 0.001];
const T_CRITICAL: [[f64; 4]; 30] = [
    [6.313752, 12.706205, 63.656741, 636.619249],
    [2.919986, 4.302653, 9.924843, 31.599055],
    [2.353363, 3.182446, 5.840909, 12.923979],
    [2.131847, 2.776445, 4.604095, 8.610302],
    [2.015048, 2.570582, 4.032143, 6.868827],
    [1.943180, 2.446912, 3.707428, 5.958816],
    [1.894579, 2.364624, 3.499483, 5.407883],
    [1.859548, 2.306004, 3.355387, 5.041305],
    [1.833113, 2.262157, 3.249836, 4.780913],
    [1.812461, 2.228139, 3.169273, 4.586894],
    [1.795885, 2.200985, 3.105807, 4.436979],
    [1.782288, 2.178813, 3.054540, 4.317791],
    [1.770933, 2.160369, 3.012276, 4.220832],
    [1.761310, 2.144787, 2.976843, 4.140454],
    [1.753050, 2.131450, 2.946713, 4.072765],
    [1.745884, 2.119905, 2.920782, 4.014996],
    [1.739607, 2.109816, 2.898231, 3.965126],
    [1.734064, 2.100922, 2.878440, 3.921646],
    [1.729133, 2.093024, 2.860935, 3.883406],
    [1.724718, 2.085963, 2.845340, 3.849516],
    [1.720743, 2.079614, 2.831360, 3.819277],
    [1.717144, 2.073873, 2.818756, 3.792131],
    [1.713872, 2.068658, 2.807336, 3.767627],
    [1.710882, 2.063899, 2.796940, 3.745399],
    [1.708141, 2.059539, 2.787436, 3.725144],
    [1.705618, 2.055529, 2.778715, 3.706612],
    [1.703288, 2.051831, 2.770683, 3.689592],
    [1.701131, 2.048407, 2.763262, 3.673906],
    [1.699127, 2.045230, 2.756386, 3.659405],
    [1.697261, 2.042272, 2.749996, 3.645959],
];

/// Paired t statistic with its degrees of freedom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest<S> {
    pub t: S,
    pub dof: usize,
}

impl<S: Scalar> TTest<S> {
    /// Two-sided critical value at one of [`T_LEVELS`]; `None` for other
    /// levels or more than 30 degrees of freedom.
    pub fn critical_value(&self, alpha: f64) -> Option<f64> {
        let col = T_LEVELS.iter().position(|&a| a == alpha)?;
        T_CRITICAL.get(self.dof.checked_sub(1)?).map(|row| row[col])
    }

    /// Whether the two-sided test rejects at `alpha`; `None` when the table
    /// does not cover the case.
    pub fn significant_at(&self, alpha: f64) -> Option<bool> {
        self.critical_value(alpha).map(|c| self.t.as_f64().abs() > c)
    }

    /// Bracket `(lower, upper)` on the two-sided p-value from the table.
    pub fn p_value_bounds(&self) -> Option<(f64, f64)> {
        let row = T_CRITICAL.get(self.dof.checked_sub(1)?)?;
        let t = self.t.as_f64().abs();
        let mut upper = 1.0;
        for (&c, &alpha) in row.iter().zip(&T_LEVELS) {
            if t <= c {
                return Some((alpha, upper));
            }
            upper = alpha;
        }
        Some((0.0, upper))
    }
}

/// Paired t-test on `a - b` with the sample (n - 1) standard deviation.
pub fn paired_t_test<S: Scalar>(a: &[S], b: &[S]) -> Result<TTest<S>> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), actual: b.len() });
    }
    if a.len() < 2 {
        return Err(Error::invalid("paired t-test needs at least two pairs"));
    }
    let d: Vec<S> = a.iter().zip(b).map(|(&x, &y)| x - y).collect();
    let n = S::from_count(d.len());
    let mean = scalar::mean(&d);
    let var = scalar::sum(d.iter().map(|&v| (v - mean) * (v - mean))) / (n - S::one());
    if var == S::zero() {
        return Err(Error::ConstantDifference);
    }
    Ok(TTest { t: mean * n.sqrt() / var.sqrt(), dof: d.len() - 1 })
}

/// Shapley attribution of one prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapleyExplanation<S> {
    /// Mean model output over the background set.
    pub base_value: S,
    pub phi: [S; FEATURE_COUNT],
    pub predicted: S,
}

const SUBSETS: usize = 1 << FEATURE_COUNT;

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Exact Shapley values of `value` at `x`. A coalition `F` is valued as the
/// mean over background rows of `value` evaluated on the row with features in
/// `F` replaced by those of `x`.
pub fn shapley_values_with<S, F>(value: F, x: &[S; FEATURE_COUNT], background: &[[S; FEATURE_COUNT]]) -> Result<ShapleyExplanation<S>>
where
    S: Scalar,
    F: Fn(&[S; FEATURE_COUNT]) -> Result<S> + Sync,
{
    if background.is_empty() {
        return Err(Error::Empty("Shapley background"));
    }
    let rows = S::from_count(background.len());
    let coalition_values: Vec<S> = (0..SUBSETS)
        .into_par_iter()
        .map(|mask| {
            let total = background.iter().try_fold(S::zero(), |acc, row| {
                let mut z = *row;
                for (f, zf) in z.iter_mut().enumerate() {
                    if mask & (1 << f) != 0 {
                        *zf = x[f];
                    }
                }
                Ok::<_, Error>(acc + value(&z)?)
            })?;
            Ok(total / rows)
        })
        .collect::<Result<_>>()?;

    let n_fact = factorial(FEATURE_COUNT);
    let weight: Vec<S> = (0..FEATURE_COUNT)
        .map(|k| S::lit(factorial(k) * factorial(FEATURE_COUNT - k - 1) / n_fact))
        .collect();
    let mut phi = [S::zero(); FEATURE_COUNT];
    for (f, phi_f) in phi.iter_mut().enumerate() {
        let bit = 1 << f;
        *phi_f = (0..SUBSETS)
            .filter(|mask| mask & bit == 0)
            .fold(S::zero(), |acc, mask| {
                let size = (mask as u32).count_ones() as usize;
                acc + weight[size] * (coalition_values[mask | bit] - coalition_values[mask])
            });
    }
    Ok(ShapleyExplanation { base_value: coalition_values[0], phi, predicted: coalition_values[SUBSETS - 1] })
}

/// Shapley values of a trained classifier's link probability, in raw
/// (unstandardized) feature space.
pub fn shapley_values<S: Scalar>(
    model: &Classifier<S>,
    x: &[S; FEATURE_COUNT],
    background: &[[S; FEATURE_COUNT]],
) -> Result<ShapleyExplanation<S>> {
    shapley_values_with(|z| model.predict_array(z), x, background)
}

/// Mean absolute Shapley value per feature with the features ranked by it,
/// most important first (ties keep feature order).
#[derive(Debug, Clone, PartialEq)]
pub struct Importance<S> {
    pub mean_abs_phi: [S; FEATURE_COUNT],
    pub ranking: [usize; FEATURE_COUNT],
}

pub fn global_importance<S: Scalar>(explanations: &[ShapleyExplanation<S>]) -> Result<Importance<S>> {
    if explanations.is_empty() {
        return Err(Error::Empty("explanations"));
    }
    let n = S::from_count(explanations.len());
    let mut mean_abs_phi = [S::zero(); FEATURE_COUNT];
    for e in explanations {
        for (m, p) in mean_abs_phi.iter_mut().zip(&e.phi) {
            *m = *m + p.abs();
        }
    }
    mean_abs_phi.iter_mut().for_each(|m| *m = *m / n);
    let mut ranking: [usize; FEATURE_COUNT] = std::array::from_fn(|i| i);
    ranking.sort_by(|&a, &b| mean_abs_phi[b].partial_cmp(&mean_abs_phi[a]).expect("finite importance"));
    Ok(Importance { mean_abs_phi, ranking })
}

/// One explained pair as emitted to JSON.
#[derive(Debug, Clone, Serialize)]
pub struct PairExplanation {
    pub u: usize,
    pub v: usize,
    pub base: f64,
    pub phi: [f64; FEATURE_COUNT],
    pub predicted: f64,
}

impl PairExplanation {
    pub fn new<S: Scalar>(u: usize, v: usize, e: &ShapleyExplanation<S>) -> Self {
        Self { u, v, base: e.base_value.as_f64(), phi: e.phi.map(|p| p.as_f64()), predicted: e.predicted.as_f64() }
    }
}

impl<S: Scalar> Importance<S> {
    /// `label,feature,rank,mean_abs_phi` rows in ranking order.
    pub fn write_csv_rows(&self, out: &mut impl Write, label: &str) -> Result<()> {
        for (rank, &f) in self.ranking.iter().enumerate() {
            writeln!(out, "{label},{},{},{}", FEATURE_NAMES[f], rank + 1, self.mean_abs_phi[f])?;
        }
        Ok(())
    }

    /// Horizontal bar chart of mean |phi|, most important feature on top.
    pub fn write_svg(&self, mut out: impl Write, title: &str) -> Result<()> {
        const BAR_H: f64 = 28.0;
        const LEFT: f64 = 190.0;
        const WIDTH: f64 = 360.0;
        let top = 40.0;
        let height = top + BAR_H * FEATURE_COUNT as f64 + 20.0;
        let max = self.mean_abs_phi.iter().fold(0.0f64, |m, v| m.max(v.as_f64()));
        let scale = if max > 0.0 { WIDTH / max } else { 0.0 };
        writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{height}" font-family="sans-serif" font-size="13">"#,
            LEFT + WIDTH + 90.0
        )?;
        writeln!(out, r#"<text x="10" y="22" font-size="15">{}</text>"#, escape(title))?;
        for (row, &f) in self.ranking.iter().enumerate() {
            let y = top + row as f64 * BAR_H;
            let v = self.mean_abs_phi[f].as_f64();
            writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, LEFT - 8.0, y + 17.0, FEATURE_NAMES[f])?;
            writeln!(out, r##"<rect x="{LEFT}" y="{}" width="{:.3}" height="{}" fill="#1e88e5"/>"##, y + 4.0, v * scale, BAR_H - 8.0)?;
            writeln!(out, r#"<text x="{:.3}" y="{}">{v:.4}</text>"#, LEFT + v * scale + 6.0, y + 17.0)?;
        }
        writeln!(out, "</svg>")?;
        Ok(())
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
