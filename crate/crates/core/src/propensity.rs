//! Adaptive group-Lasso propensity models `g: X_{-j} -> X_j`.
//!
//! Each covariate's penalty is scaled by `||beta_m||^{-gamma}` from the outcome
//! screen, so covariates that do not predict the outcome are pushed out of the
//! propensity model entirely. Discrete targets get a softmax head; continuous
//! targets get a mixture density head on the standardized value.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureKind, FeatureSpec};
use crate::encode::{ColumnEncoding, Encoder};
use crate::error::{Error, Result};
use crate::nn::{train, GroupedNet, Head, HeadOutput, Samples, TrainConfig, TrainReport};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveWeights {
    /// One weight per covariate, in feature order with the target removed.
    pub weights: Vec<f64>,
    pub gamma: f64,
    pub w_max: f64,
}

/// `w_m = min(||beta_m||^{-gamma}, w_max)` over all features except `target`.
pub fn adaptive_weights(predictive_weights: &[f64], target: usize, gamma: f64, w_max: f64) -> Result<AdaptiveWeights> {
    if !(gamma > 0.0) || !(w_max > 0.0) {
        return Err(Error::InvalidInput("gamma and w_max must be positive".into()));
    }
    if target >= predictive_weights.len() {
        return Err(Error::InvalidInput(format!("target {target} out of range")));
    }
    let weights = predictive_weights
        .iter()
        .enumerate()
        .filter(|(m, _)| *m != target)
        .map(|(_, &norm)| if norm > 0.0 { norm.powf(-gamma).min(w_max) } else { w_max })
        .collect();
    Ok(AdaptiveWeights { weights, gamma, w_max })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropensityConfig {
    /// Hidden widths; the last one is the representation dimension.
    pub hidden: Vec<usize>,
    pub mixture_components: usize,
    pub train: TrainConfig,
}

impl Default for PropensityConfig {
    fn default() -> Self {
        Self {
            hidden: vec![32, 8],
            mixture_components: 5,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct PropensityFit {
    pub target: usize,
    pub spec: FeatureSpec,
    /// Encoder of the full feature row; the target column is skipped.
    pub encoder: Encoder,
    pub net: GroupedNet,
    pub weights: AdaptiveWeights,
    pub report: TrainReport,
}

/// Fits the propensity model of feature `target` with thresholds `theta * w_m`.
pub fn fit_propensity(
    data: &Dataset,
    encoder: &Encoder,
    target: usize,
    weights: &AdaptiveWeights,
    config: &PropensityConfig,
) -> Result<PropensityFit> {
    let d = data.n_features();
    if target >= d || d < 2 {
        return Err(Error::InvalidInput("propensity needs a target and at least one covariate".into()));
    }
    if weights.weights.len() != d - 1 {
        return Err(Error::DimensionMismatch {
            what: "adaptive weights",
            expected: d - 1,
            found: weights.weights.len(),
        });
    }
    if config.hidden.is_empty() {
        return Err(Error::InvalidInput("propensity model needs at least one hidden layer".into()));
    }
    let spec = data.schema().features[target].clone();
    let column = data.column(target);
    if column.iter().all(|&v| v == column[0]) {
        return Err(Error::DegenerateFeature {
            feature: spec.name.clone(),
        });
    }
    let (head, targets) = match spec.kind {
        FeatureKind::Binary => (Head::Softmax { classes: 2 }, column),
        FeatureKind::Categorical { levels } => (Head::Softmax { classes: levels }, column),
        FeatureKind::Continuous => {
            let (mean, sd) = standardization(encoder, target);
            let z = column.iter().map(|v| (v - mean) / sd).collect();
            (
                Head::MixtureDensity {
                    components: config.mixture_components,
                },
                z,
            )
        }
    };
    let width = encoder.width(Some(target));
    let samples = Samples::new(encoder.encode_dataset(data, Some(target)), width, targets, 1)?;
    let out = match head {
        Head::Softmax { classes } => classes,
        Head::MixtureDensity { components } => 3 * components,
        _ => unreachable!("propensity heads are softmax or mixture"),
    };
    let dims: Vec<usize> = std::iter::once(width).chain(config.hidden.iter().copied()).chain([out]).collect();
    let net = GroupedNet::new(dims, head, encoder.groups(Some(target)), config.train.seed)?;
    let loss = head.default_loss();
    let (net, report) = train(net, &samples, loss, &config.train, &weights.weights)?;
    Ok(PropensityFit {
        target,
        spec,
        encoder: encoder.clone(),
        net,
        weights: weights.clone(),
        report,
    })
}

fn standardization(encoder: &Encoder, j: usize) -> (f64, f64) {
    match encoder.columns()[j] {
        ColumnEncoding::Standardized { mean, sd } => (mean, sd),
        _ => (0.0, 1.0),
    }
}

impl PropensityFit {
    fn covariates(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.encoder.n_features() {
            return Err(Error::DimensionMismatch {
                what: "propensity input row",
                expected: self.encoder.n_features(),
                found: row.len(),
            });
        }
        Ok(self.encoder.encode_row(row, Some(self.target)))
    }

    /// `P(X_j = value | x_{-j})` for discrete targets, the conditional density otherwise.
    ///
    /// `row` is a full feature row; its entry at the target index is ignored.
    pub fn score(&self, value: f64, row: &[f64]) -> Result<f64> {
        self.spec.check_value(value)?;
        match self.net.predict(&self.covariates(row)?)? {
            HeadOutput::Simplex(p) => Ok(p[value as usize]),
            HeadOutput::Mixture(params) => {
                let (mean, sd) = standardization(&self.encoder, self.target);
                Ok(params.density((value - mean) / sd) / sd)
            }
            _ => unreachable!("propensity heads are softmax or mixture"),
        }
    }

    /// Full predicted distribution over levels (discrete targets only).
    pub fn level_probabilities(&self, row: &[f64]) -> Result<Vec<f64>> {
        match self.net.predict(&self.covariates(row)?)? {
            HeadOutput::Simplex(p) => Ok(p),
            _ => Err(Error::InvalidInput(format!("{} is continuous", self.spec.name))),
        }
    }

    /// Last-hidden activation for the covariates of `row`.
    pub fn representation(&self, row: &[f64]) -> Result<Vec<f64>> {
        self.net.last_hidden(&self.covariates(row)?)
    }

    /// Row-major `n x r` representations of every row of `data`.
    pub fn representations(&self, data: &Dataset) -> Result<Vec<f64>> {
        self.net.last_hidden_batch(&self.encoder.encode_dataset(data, Some(self.target)))
    }

    pub fn representation_dim(&self) -> usize {
        self.net.last_hidden_dim()
    }

    /// First-layer group norms, one per covariate.
    pub fn covariate_norms(&self) -> Vec<f64> {
        self.net.group_norms()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Schema;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn weight_formula_examples() {
        let w = adaptive_weights(&[9.0, 2.0, 0.0, 0.5], 0, 1.0, 1e6).unwrap();
        assert_eq!(w.weights, vec![0.5, 1e6, 2.0]);
        let w = adaptive_weights(&[0.5, 1.0], 1, 2.0, 1e6).unwrap();
        assert_eq!(w.weights, vec![4.0]);
        assert!(adaptive_weights(&[1.0], 0, 0.0, 1.0).is_err());
    }

    fn copy_data(n: usize, seed: u64) -> Dataset {
        // t copies c; z is noise
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let schema = Schema::new(vec![
            FeatureSpec::binary("t"),
            FeatureSpec::binary("c"),
            FeatureSpec::continuous("z", -10.0, 10.0),
        ])
        .unwrap();
        let mut values = Vec::new();
        for _ in 0..n {
            let c = f64::from(u8::from(rng.random_bool(0.4)));
            values.extend([c, c, rng.random_range(-1.0..1.0)]);
        }
        Dataset::new(schema, values, vec![0; n]).unwrap()
    }

    fn quick() -> PropensityConfig {
        PropensityConfig {
            train: TrainConfig {
                epochs: 40,
                learning_rate: 0.05,
                ..TrainConfig::default()
            },
            ..PropensityConfig::default()
        }
    }

    #[test]
    fn copied_confounder_drives_binary_propensity() {
        let data = copy_data(800, 1);
        let enc = Encoder::fit(&data);
        let w = adaptive_weights(&[1.0, 2.0, 0.0], 0, 1.0, 1e6).unwrap();
        let mut cfg = quick();
        cfg.train.penalty = 0.01;
        let fit = fit_propensity(&data, &enc, 0, &w, &cfg).unwrap();
        assert!(fit.score(1.0, &[0.0, 1.0, 0.3]).unwrap() > 0.95);
        assert!(fit.score(1.0, &[0.0, 0.0, 0.3]).unwrap() < 0.05);
        // capped covariate is removed and cannot move the representation
        assert_eq!(fit.covariate_norms()[1], 0.0);
        assert_eq!(
            fit.representation(&[0.0, 1.0, -0.9]).unwrap(),
            fit.representation(&[0.0, 1.0, 0.9]).unwrap()
        );
        assert_eq!(fit.representation_dim(), 8);
        let p = fit.level_probabilities(&[0.0, 1.0, 0.0]).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn all_capped_reduces_to_marginal() {
        let data = copy_data(2000, 2);
        let enc = Encoder::fit(&data);
        let w = adaptive_weights(&[1.0, 0.0, 0.0], 0, 1.0, 1e6).unwrap();
        let mut cfg = quick();
        cfg.train.penalty = 0.01;
        let fit = fit_propensity(&data, &enc, 0, &w, &cfg).unwrap();
        assert!(fit.covariate_norms().iter().all(|&n| n == 0.0));
        let marginal = data.column(0).iter().sum::<f64>() / 2000.0;
        let p = fit.score(1.0, data.row(0)).unwrap();
        assert!((p - marginal).abs() < 0.02, "{p} vs {marginal}");
    }

    #[test]
    fn continuous_target_uses_density() {
        let data = copy_data(500, 3);
        let enc = Encoder::fit(&data);
        let w = adaptive_weights(&[1.0, 1.0, 1.0], 2, 1.0, 1e6).unwrap();
        let fit = fit_propensity(&data, &enc, 2, &w, &quick()).unwrap();
        assert!(matches!(fit.net.head(), Head::MixtureDensity { components: 5 }));
        // uniform(-1, 1) has density 0.5
        let dens = fit.score(0.0, data.row(0)).unwrap();
        assert!(dens > 0.3 && dens < 0.8, "{dens}");
        assert!(fit.score(20.0, data.row(0)).is_err());
    }

    #[test]
    fn constant_target_is_degenerate() {
        let data = copy_data(50, 4);
        let rows: Vec<Vec<f64>> = data.rows().map(|r| vec![1.0, r[1], r[2]]).collect();
        let data = Dataset::from_rows(data.schema().clone(), &rows, vec![0; 50]).unwrap();
        let enc = Encoder::fit(&data);
        let w = adaptive_weights(&[1.0, 1.0, 1.0], 0, 1.0, 1e6).unwrap();
        assert!(matches!(
            fit_propensity(&data, &enc, 0, &w, &quick()),
            Err(Error::DegenerateFeature { .. })
        ));
    }
}
