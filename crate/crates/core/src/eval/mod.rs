//! Classification metrics, effect-estimate errors and the two-sample tests
//! used by the significance screen.

pub mod special;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use special::{chi_square_sf, student_t_two_sided};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn from_predictions(labels: &[u8], predictions: &[u8]) -> Result<Self> {
        if labels.len() != predictions.len() {
            return Err(Error::DimensionMismatch {
                what: "predictions",
                expected: labels.len(),
                found: predictions.len(),
            });
        }
        let mut c = Self::default();
        for (&y, &p) in labels.iter().zip(predictions) {
            match (y != 0, p != 0) {
                (true, true) => c.tp += 1,
                (false, true) => c.fp += 1,
                (true, false) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

/// Precision and recall are `None` when their denominator is zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

impl Metrics {
    /// Harmonic mean of precision and recall, `None` if either is undefined or both are 0.
    pub fn f1(&self) -> Option<f64> {
        match (self.precision, self.recall) {
            (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
            _ => None,
        }
    }
}

pub fn confusion_metrics(c: ConfusionCounts) -> Result<Metrics> {
    if c.total() == 0 {
        return Err(Error::EmptyBatch);
    }
    let ratio = |num: u64, den: u64| (den > 0).then(|| num as f64 / den as f64);
    Ok(Metrics {
        accuracy: (c.tp + c.tn) as f64 / c.total() as f64,
        precision: ratio(c.tp, c.tp + c.fp),
        recall: ratio(c.tp, c.tp + c.fn_),
    })
}

pub fn ate_error(true_ate: f64, est_ate: f64) -> f64 {
    (true_ate - est_ate).abs()
}

/// Pairwise ATE errors over `k` interventions and their mean.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectReport {
    pub k: usize,
    pub pair_errors: Vec<((usize, usize), f64)>,
    pub mean_error: f64,
}

/// Mean of `eps[(i, j)]` over all `i > j` pairs of `k` interventions.
///
/// Keys may be given as `(i, j)` or `(j, i)`; keys outside the pair set are rejected.
pub fn mate_error(pair_errors: &BTreeMap<(usize, usize), f64>, k: usize) -> Result<EffectReport> {
    if k < 2 {
        return Err(Error::InvalidInput("mATE needs at least two interventions".into()));
    }
    let mut normalized = BTreeMap::new();
    for (&(a, b), &e) in pair_errors {
        if a == b || a >= k || b >= k {
            return Err(Error::InvalidInput(format!("pair ({a}, {b}) is not a pair of {k} interventions")));
        }
        if !(e >= 0.0) {
            return Err(Error::InvalidInput(format!("pair ({a}, {b}) has invalid error {e}")));
        }
        if normalized.insert((a.max(b), a.min(b)), e).is_some() {
            return Err(Error::InvalidInput(format!("pair ({a}, {b}) given twice")));
        }
    }
    let mut pairs = Vec::with_capacity(k * (k - 1) / 2);
    for i in 0..k {
        for j in 0..i {
            let e = *normalized.get(&(i, j)).ok_or(Error::MissingPair(i, j))?;
            pairs.push(((i, j), e));
        }
    }
    let mean_error = pairs.iter().map(|(_, e)| e).sum::<f64>() / pairs.len() as f64;
    Ok(EffectReport {
        k,
        pair_errors: pairs,
        mean_error,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub dof: f64,
    pub p_value: f64,
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    // summation rounding would turn a constant sample into ulp-level variance
    if xs.iter().all(|&x| x == xs[0]) {
        return (xs[0], 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Welch's unequal-variance t-test, two-sided.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InvalidInput("t-test needs at least two observations per sample".into()));
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (sa, sb) = (va / a.len() as f64, vb / b.len() as f64);
    let se2 = sa + sb;
    if !(se2 > 0.0) {
        return Err(Error::InvalidInput("t-test samples both have zero variance".into()));
    }
    let statistic = (ma - mb) / se2.sqrt();
    let dof = se2 * se2 / (sa * sa / (a.len() as f64 - 1.0) + sb * sb / (b.len() as f64 - 1.0));
    Ok(TestResult {
        statistic,
        dof,
        p_value: student_t_two_sided(statistic, dof),
    })
}

/// Pearson chi-square test of independence on an `r x c` contingency table.
pub fn chi_square_test(table: &[Vec<f64>]) -> Result<TestResult> {
    let r = table.len();
    let c = table.first().map_or(0, Vec::len);
    if r < 2 || c < 2 || table.iter().any(|row| row.len() != c) {
        return Err(Error::InvalidInput("chi-square needs a rectangular table of at least 2x2".into()));
    }
    if table.iter().flatten().any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidInput("chi-square counts must be finite and non-negative".into()));
    }
    let rows: Vec<f64> = table.iter().map(|row| row.iter().sum()).collect();
    let cols: Vec<f64> = (0..c).map(|k| table.iter().map(|row| row[k]).sum()).collect();
    if rows.iter().chain(&cols).any(|&m| m <= 0.0) {
        return Err(Error::InvalidInput("chi-square table has an empty row or column".into()));
    }
    let total: f64 = rows.iter().sum();
    let mut statistic = 0.0;
    for (i, row) in table.iter().enumerate() {
        for (k, &o) in row.iter().enumerate() {
            let e = rows[i] * cols[k] / total;
            statistic += (o - e).powi(2) / e;
        }
    }
    let dof = ((r - 1) * (c - 1)) as f64;
    Ok(TestResult {
        statistic,
        dof,
        p_value: chi_square_sf(statistic, dof),
    })
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len()) as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    sab / (saa * sbb).sqrt()
}

/// Area under the ROC curve via the rank-sum statistic, ties counted as one half.
pub fn roc_auc(labels: &[u8], scores: &[f64]) -> Option<f64> {
    let mut idx: Vec<usize> = (0..labels.len().min(scores.len())).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let n_pos = idx.iter().filter(|&&i| labels[i] != 0).count() as f64;
    let n_neg = idx.len() as f64 - n_pos;
    if n_pos == 0.0 || n_neg == 0.0 {
        return None;
    }
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < idx.len() {
        let mut end = start;
        while end + 1 < idx.len() && scores[idx[end + 1]] == scores[idx[start]] {
            end += 1;
        }
        let avg_rank = (start + end) as f64 / 2.0 + 1.0;
        rank_sum += avg_rank * idx[start..=end].iter().filter(|&&i| labels[i] != 0).count() as f64;
        start = end + 1;
    }
    Some((rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureScreen {
    pub feature: String,
    pub test: String,
    pub p_original: f64,
    pub p_distilled: f64,
    pub significant_original: bool,
    pub significant_distilled: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScreenReport {
    pub alpha: f64,
    pub features: Vec<FeatureScreen>,
    pub significant_original: usize,
    pub significant_distilled: usize,
    pub only_original: Vec<String>,
    pub only_distilled: Vec<String>,
}

impl ScreenReport {
    pub fn is_significant_original(&self, name: &str) -> Option<bool> {
        self.features.iter().find(|f| f.feature == name).map(|f| f.significant_original)
    }

    pub fn is_significant_distilled(&self, name: &str) -> Option<bool> {
        self.features.iter().find(|f| f.feature == name).map(|f| f.significant_distilled)
    }
}

/// Class-difference p-value of one column: chi-square over its distinct
/// values when `discrete`, Welch t otherwise. Columns that carry no
/// information about the class (constant overall) get p = 1.
pub fn class_difference_p(values: &[f64], labels: &[u8], discrete: bool) -> Result<f64> {
    let (pos, neg): (Vec<(f64, u8)>, Vec<(f64, u8)>) =
        values.iter().copied().zip(labels.iter().copied()).partition(|(_, y)| *y != 0);
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::DegenerateLabels("both classes are required for the screen".into()));
    }
    if discrete {
        let mut levels: Vec<f64> = values.to_vec();
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        if levels.len() < 2 {
            return Ok(1.0);
        }
        let index = |v: f64| levels.binary_search_by(|l| l.total_cmp(&v)).expect("level present");
        let mut table = vec![vec![0.0; levels.len()]; 2];
        for (&v, &y) in values.iter().zip(labels) {
            table[usize::from(y != 0)][index(v)] += 1.0;
        }
        Ok(chi_square_test(&table)?.p_value)
    } else {
        let a: Vec<f64> = pos.iter().map(|p| p.0).collect();
        let b: Vec<f64> = neg.iter().map(|p| p.0).collect();
        match welch_t_test(&a, &b) {
            Ok(t) => Ok(t.p_value),
            // zero variance in both classes
            Err(_) if a.len() >= 2 && b.len() >= 2 => Ok(if a[0] == b[0] { 1.0 } else { 0.0 }),
            Err(e) => Err(e),
        }
    }
}

/// Per-feature class-significance flags on the original and distilled data.
///
/// The test for each feature follows the original schema: chi-square for
/// binary/categorical features (over the distinct distilled values on the
/// distilled side), Welch t for continuous ones. No multiple-testing correction.
pub fn significance_screen(original: &Dataset, distilled: &Dataset, alpha: f64) -> Result<ScreenReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha {alpha} outside (0, 1)")));
    }
    if original.schema().names() != distilled.schema().names() || original.n_rows() != distilled.n_rows() {
        return Err(Error::Schema("original and distilled data must have matching features and rows".into()));
    }
    let mut features = Vec::with_capacity(original.n_features());
    for (j, spec) in original.schema().features.iter().enumerate() {
        let discrete = spec.kind.is_discrete();
        let p_original = class_difference_p(&original.column(j), original.labels(), discrete)?;
        let p_distilled = class_difference_p(&distilled.column(j), distilled.labels(), discrete)?;
        features.push(FeatureScreen {
            feature: spec.name.clone(),
            test: if discrete { "chi_square" } else { "welch_t" }.into(),
            p_original,
            p_distilled,
            significant_original: p_original < alpha,
            significant_distilled: p_distilled < alpha,
        });
    }
    let pick = |f: &dyn Fn(&FeatureScreen) -> bool| -> Vec<String> {
        features.iter().filter(|s| f(s)).map(|s| s.feature.clone()).collect()
    };
    Ok(ScreenReport {
        alpha,
        significant_original: features.iter().filter(|f| f.significant_original).count(),
        significant_distilled: features.iter().filter(|f| f.significant_distilled).count(),
        only_original: pick(&|f| f.significant_original && !f.significant_distilled),
        only_distilled: pick(&|f| f.significant_distilled && !f.significant_original),
        features,
    })
}
