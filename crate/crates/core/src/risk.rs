//! Final risk classifier with class weighting and an F1-optimal threshold.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::encode::Encoder;
use crate::error::{Error, Result};
use crate::eval::{confusion_metrics, ConfusionCounts};
use crate::nn::{train, GroupedNet, Head, LossKind, ModelDocument, Samples, TrainConfig, TrainReport};
use crate::outcome::init_output_bias;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskConfig {
    pub hidden: Vec<usize>,
    /// Share of the training rows held out to pick the threshold.
    pub validation_fraction: f64,
    pub train: TrainConfig,
}

impl Default for RiskConfig {
    fn default() -> Self {
        Self {
            hidden: vec![32, 32],
            validation_fraction: 0.2,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RiskClassifier {
    pub net: GroupedNet,
    pub threshold: f64,
    /// Input encoding for raw features; `None` feeds rows unchanged.
    pub encoder: Option<Encoder>,
    pub report: TrainReport,
}

/// Threshold maximising F1 over the distinct scores, placed halfway to the
/// next lower score; 0.5 when scores are constant.
pub fn f1_optimal_threshold(labels: &[u8], scores: &[f64]) -> f64 {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    if order.is_empty() || scores[order[0]] == scores[order[order.len() - 1]] {
        return 0.5;
    }
    let total_pos = labels.iter().filter(|&&y| y != 0).count() as f64;
    let (mut tp, mut fp) = (0.0, 0.0);
    let (mut best_f1, mut best_t) = (-1.0, 0.5);
    let mut k = 0;
    while k < order.len() {
        let t = scores[order[k]];
        while k < order.len() && scores[order[k]] == t {
            if labels[order[k]] != 0 {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
            k += 1;
        }
        // predicting positive for every score >= t
        let f1 = if tp > 0.0 { 2.0 * tp / (2.0 * tp + fp + (total_pos - tp)) } else { 0.0 };
        if f1 > best_f1 {
            best_f1 = f1;
            best_t = match order.get(k) {
                Some(&next) => 0.5 * (t + scores[next]),
                None => t,
            };
        }
    }
    best_t
}

/// Trains on a stratified fit part of `data` with class weights `n / (2 n_c)`
/// and picks the threshold on the held-out part. With `encode` the rows go
/// through an [`Encoder`] fitted on `data`.
pub fn fit_risk_classifier(data: &Dataset, encode: bool, config: &RiskConfig) -> Result<RiskClassifier> {
    data.check_binary_labels()?;
    let (fit_idx, val_idx) = data.stratified_split(config.validation_fraction, config.train.seed ^ 0x7a11)?;
    let fit = data.subset(&fit_idx);
    let val = data.subset(&val_idx);
    fit.check_binary_labels()?;

    let encoder = encode.then(|| Encoder::fit(&fit));
    let to_inputs = |d: &Dataset| match &encoder {
        Some(e) => e.encode_dataset(d, None),
        None => d.values().to_vec(),
    };
    let width = encoder.as_ref().map_or(data.n_features(), |e| e.width(None));
    let n = fit.n_rows() as f64;
    let pos = fit.positives() as f64;
    let class_weight = [n / (2.0 * (n - pos)), n / (2.0 * pos)];
    let weights = fit.labels().iter().map(|&y| class_weight[usize::from(y)]).collect();
    let targets = fit.labels().iter().map(|&y| f64::from(y)).collect();
    let samples = Samples::new(to_inputs(&fit), width, targets, 1)?.with_weights(weights)?;

    let dims: Vec<usize> = std::iter::once(width).chain(config.hidden.iter().copied()).chain([1]).collect();
    let mut net = GroupedNet::with_singleton_groups(dims, Head::Sigmoid, config.train.seed)?;
    // the weighted classes are balanced, so start from even odds
    init_output_bias(&mut net, &[0, 1]);
    let plain = TrainConfig {
        penalty: 0.0,
        ..config.train.clone()
    };
    let (net, report) = train(net, &samples, LossKind::CrossEntropy, &plain, &vec![0.0; width])?;
    let threshold = if val.n_rows() > 0 {
        f1_optimal_threshold(val.labels(), &net.predict_probabilities(&to_inputs(&val))?)
    } else {
        0.5
    };
    Ok(RiskClassifier {
        net,
        threshold,
        encoder,
        report,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierMetrics {
    pub accuracy: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub auc: Option<f64>,
    pub counts: ConfusionCounts,
}

/// Stored form of a fitted classifier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskModelDocument {
    pub model: ModelDocument,
    pub threshold: f64,
    pub encoder: Option<Encoder>,
}

impl RiskClassifier {
    pub fn to_document(&self) -> RiskModelDocument {
        RiskModelDocument {
            model: ModelDocument::from_net(&self.net, None),
            threshold: self.threshold,
            encoder: self.encoder.clone(),
        }
    }

    /// Rebuilds a classifier; the training trace is not stored and comes back empty.
    pub fn from_document(doc: &RiskModelDocument) -> Result<Self> {
        let net = doc.model.to_net()?;
        if !matches!(net.head(), Head::Sigmoid) || !doc.threshold.is_finite() {
            return Err(Error::Schema("risk model needs a sigmoid head and a finite threshold".into()));
        }
        Ok(Self {
            net,
            threshold: doc.threshold,
            encoder: doc.encoder.clone(),
            report: TrainReport {
                loss_trace: Vec::new(),
                epochs_run: 0,
                stopped_early: false,
            },
        })
    }

    fn inputs(&self, data: &Dataset) -> Vec<f64> {
        match &self.encoder {
            Some(e) => e.encode_dataset(data, None),
            None => data.values().to_vec(),
        }
    }

    /// `(probability, label)` with label 1 iff probability >= threshold.
    pub fn predict(&self, row: &[f64]) -> Result<(f64, u8)> {
        let x = match &self.encoder {
            Some(e) => {
                if row.len() != e.n_features() {
                    return Err(Error::DimensionMismatch {
                        what: "risk input row",
                        expected: e.n_features(),
                        found: row.len(),
                    });
                }
                e.encode_row(row, None)
            }
            None => row.to_vec(),
        };
        let p = self.net.predict_probabilities(&x)?[0];
        Ok((p, u8::from(p >= self.threshold)))
    }

    pub fn predict_dataset(&self, data: &Dataset) -> Result<Vec<(f64, u8)>> {
        Ok(self
            .net
            .predict_probabilities(&self.inputs(data))?
            .into_iter()
            .map(|p| (p, u8::from(p >= self.threshold)))
            .collect())
    }

    pub fn evaluate(&self, data: &Dataset) -> Result<ClassifierMetrics> {
        let preds = self.predict_dataset(data)?;
        let labels: Vec<u8> = preds.iter().map(|p| p.1).collect();
        let scores: Vec<f64> = preds.iter().map(|p| p.0).collect();
        metrics_from_predictions(data.labels(), &labels, Some(&scores))
    }
}

pub fn metrics_from_predictions(truth: &[u8], predicted: &[u8], scores: Option<&[f64]>) -> Result<ClassifierMetrics> {
    let counts = ConfusionCounts::from_predictions(truth, predicted)?;
    let m = confusion_metrics(counts)?;
    Ok(ClassifierMetrics {
        accuracy: m.accuracy,
        precision: m.precision,
        recall: m.recall,
        f1: m.f1(),
        auc: scores.and_then(|s| crate::eval::roc_auc(truth, s)),
        counts,
    })
}
