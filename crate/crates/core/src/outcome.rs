//! Group-Lasso outcome screen: fits `f: X -> Y` and reads off one predictive
//! weight per original feature as the norm of its first-layer group.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::encode::Encoder;
use crate::error::{Error, Result};
use crate::mdn::sigmoid;
use crate::nn::{train, GroupedNet, Head, LossKind, Samples, TrainConfig, TrainReport};

#[derive(Clone, Debug)]
pub struct OutcomeFit {
    pub encoder: Encoder,
    pub net: GroupedNet,
    /// `||beta_j||` per original feature.
    pub predictive_weights: Vec<f64>,
    pub selected: Vec<bool>,
    pub report: TrainReport,
}

/// Serializable summary of an outcome fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureWeight {
    pub feature: String,
    pub weight: f64,
}

/// Log-odds of the label prevalence, clamped away from +-infinity.
pub(crate) fn prevalence_logit(labels: &[u8]) -> f64 {
    let p = labels.iter().map(|&y| f64::from(y)).sum::<f64>() / labels.len().max(1) as f64;
    let p = p.clamp(1e-6, 1.0 - 1e-6);
    (p / (1.0 - p)).ln()
}

/// Sets the output intercept of a sigmoid net so it starts at the prevalence.
pub(crate) fn init_output_bias(net: &mut GroupedNet, labels: &[u8]) {
    let last = net.num_layers() - 1;
    net.biases_mut(last)[0] = prevalence_logit(labels);
}

/// Fits the outcome network with unweighted log-loss and penalty `config.penalty`
/// on every first-layer group.
pub fn fit_outcome(data: &Dataset, hidden: &[usize], config: &TrainConfig) -> Result<OutcomeFit> {
    data.check_binary_labels()?;
    let encoder = Encoder::fit(data);
    let width = encoder.width(None);
    let inputs = encoder.encode_dataset(data, None);
    let targets = data.labels().iter().map(|&y| f64::from(y)).collect();
    let samples = Samples::new(inputs, width, targets, 1)?;

    let dims: Vec<usize> = std::iter::once(width).chain(hidden.iter().copied()).chain([1]).collect();
    let mut net = GroupedNet::new(dims, Head::Sigmoid, encoder.groups(None), config.seed)?;
    init_output_bias(&mut net, data.labels());
    let weights = vec![1.0; data.n_features()];
    let (net, report) = train(net, &samples, LossKind::CrossEntropy, config, &weights)?;

    let predictive_weights = net.group_norms();
    let selected = predictive_weights.iter().map(|&w| w > 0.0).collect();
    Ok(OutcomeFit {
        encoder,
        net,
        predictive_weights,
        selected,
        report,
    })
}

impl OutcomeFit {
    /// Predicted risk probability for one raw feature row.
    pub fn predict(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.encoder.n_features() {
            return Err(Error::DimensionMismatch {
                what: "outcome input row",
                expected: self.encoder.n_features(),
                found: row.len(),
            });
        }
        let pass = self.net.forward(&self.encoder.encode_row(row, None))?;
        Ok(sigmoid(pass.logits[0]))
    }

    pub fn feature_weights(&self, names: &[String]) -> Vec<FeatureWeight> {
        names
            .iter()
            .zip(&self.predictive_weights)
            .map(|(n, &w)| FeatureWeight {
                feature: n.clone(),
                weight: w,
            })
            .collect()
    }

    /// Two-column `feature,weight` CSV.
    pub fn weights_csv(&self, names: &[String]) -> Result<String> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(["feature", "weight"])?;
        for fw in self.feature_weights(names) {
            w.write_record([fw.feature, crate::data::format_value(fw.weight)])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Mean log-loss of predicting `p` for every label.
pub fn constant_log_loss(labels: &[u8], p: f64) -> f64 {
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    labels
        .iter()
        .map(|&y| if y == 1 { -p.ln() } else { -(1.0 - p).ln() })
        .sum::<f64>()
        / labels.len() as f64
}

/// Mean log-loss of `fit` on `data`.
pub fn outcome_log_loss(fit: &OutcomeFit, data: &Dataset) -> Result<f64> {
    let probs = fit.net.predict_probabilities(&fit.encoder.encode_dataset(data, None))?;
    Ok(probs
        .iter()
        .zip(data.labels())
        .map(|(&p, &y)| constant_log_loss(&[y], p))
        .sum::<f64>()
        / probs.len() as f64)
}
