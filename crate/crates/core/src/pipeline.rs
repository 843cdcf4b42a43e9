//! End-to-end distillation: outcome screen, per-feature propensity and sigma
//! models, response curves, and the distilled dataset.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attribution::{fit_sigma, response_curve, AttributionMap, Baseline, SigmaConfig, SigmaModel};
use crate::data::{Dataset, FeatureSpec, Schema};
use crate::encode::Encoder;
use crate::error::{Error, Result};
use crate::outcome::{fit_outcome, OutcomeFit};
use crate::propensity::{adaptive_weights, fit_propensity, PropensityConfig, PropensityFit};
use crate::risk::{fit_risk_classifier, ClassifierMetrics, RiskClassifier, RiskConfig};
use crate::nn::TrainConfig;

/// Optimiser settings shared by every network of the pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub tolerance: f64,
    pub patience: usize,
    pub weight_decay: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            learning_rate: 0.2,
            epochs: t.epochs,
            batch_size: 512,
            tolerance: t.tolerance,
            patience: t.patience,
            weight_decay: 0.01,
        }
    }
}

impl OptimizerConfig {
    pub fn train_config(&self, penalty: f64, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            penalty,
            seed,
            tolerance: self.tolerance,
            patience: self.patience,
            weight_decay: self.weight_decay,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DistillConfig {
    pub seed: u64,
    /// Explicit outcome penalty; `None` uses `lambda_scale * n^{-1/4} * d`.
    pub lambda: Option<f64>,
    pub lambda_scale: f64,
    /// Explicit propensity penalty; `None` uses `theta_scale * n^{-1/4}`.
    pub theta: Option<f64>,
    pub theta_scale: f64,
    pub gamma: f64,
    pub w_max: f64,
    pub grid_points: usize,
    pub gradient_tolerance: f64,
    pub baseline: Baseline,
    pub outcome_hidden: Vec<usize>,
    /// Propensity hidden widths; the last one is the representation size.
    pub propensity_hidden: Vec<usize>,
    pub mixture_components: usize,
    pub sigma_hidden: Vec<usize>,
    pub risk_hidden: Vec<usize>,
    pub validation_fraction: f64,
    pub test_fraction: f64,
    pub optimizer: OptimizerConfig,
    /// The response model carries no first-layer sparsity to protect, so it
    /// trains without weight decay and with smaller steps.
    pub sigma_optimizer: OptimizerConfig,
}

impl Default for DistillConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            lambda: None,
            lambda_scale: 0.05,
            theta: None,
            theta_scale: 0.2,
            gamma: 1.0,
            w_max: 1e6,
            grid_points: 21,
            gradient_tolerance: 0.01,
            baseline: Baseline::Zero,
            outcome_hidden: vec![32, 32],
            propensity_hidden: vec![32, 8],
            mixture_components: 5,
            sigma_hidden: vec![32, 32],
            risk_hidden: vec![32, 32],
            validation_fraction: 0.2,
            test_fraction: 0.2,
            optimizer: OptimizerConfig::default(),
            sigma_optimizer: OptimizerConfig {
                learning_rate: 0.05,
                batch_size: 32,
                weight_decay: 0.0,
                ..OptimizerConfig::default()
            },
        }
    }
}

const STAGE_OUTCOME: u64 = 1;
const STAGE_PROPENSITY: u64 = 2;
const STAGE_SIGMA: u64 = 3;
const STAGE_SPLIT: u64 = 4;
const STAGE_RISK: u64 = 5;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl DistillConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(m.to_string()));
        if !(self.gamma > 0.0) || !(self.w_max > 0.0) {
            return bad("gamma and w_max must be positive");
        }
        if self.grid_points < 2 {
            return bad("grid_points must be at least 2");
        }
        if !(self.gradient_tolerance >= 0.0) {
            return bad("gradient_tolerance must be non-negative");
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0)
            || !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0)
        {
            return bad("split fractions must lie in (0, 1)");
        }
        if self.propensity_hidden.is_empty() || self.mixture_components == 0 {
            return bad("propensity model needs hidden layers and mixture components");
        }
        for p in [self.lambda, self.theta].into_iter().flatten() {
            if !(p >= 0.0) || !p.is_finite() {
                return bad("penalties must be finite and non-negative");
            }
        }
        if !(self.lambda_scale >= 0.0) || !(self.theta_scale >= 0.0) {
            return bad("penalty scales must be non-negative");
        }
        self.optimizer.train_config(0.0, 0).validate()?;
        self.sigma_optimizer.train_config(0.0, 0).validate()
    }

    /// Outcome penalty for `n` rows and `d` features.
    pub fn lambda_for(&self, n: usize, d: usize) -> f64 {
        self.lambda
            .unwrap_or_else(|| self.lambda_scale * (n as f64).powf(-0.25) * d as f64)
    }

    /// Propensity penalty for `n` rows.
    pub fn theta_for(&self, n: usize) -> f64 {
        self.theta.unwrap_or_else(|| self.theta_scale * (n as f64).powf(-0.25))
    }

    /// Seed of one stage; per-feature stages xor in the feature index.
    pub fn stage_seed(&self, stage: u64, feature: usize) -> u64 {
        splitmix(self.seed ^ splitmix(stage)) ^ feature as u64
    }

    /// Base seed of every stage; per-feature seeds XOR in the feature index.
    pub fn stage_seeds(&self) -> BTreeMap<&'static str, u64> {
        [
            ("outcome", STAGE_OUTCOME),
            ("propensity", STAGE_PROPENSITY),
            ("sigma", STAGE_SIGMA),
            ("split", STAGE_SPLIT),
            ("risk", STAGE_RISK),
        ]
        .into_iter()
        .map(|(name, stage)| (name, self.stage_seed(stage, 0)))
        .collect()
    }

    fn propensity_config(&self, theta: f64, j: usize) -> PropensityConfig {
        PropensityConfig {
            hidden: self.propensity_hidden.clone(),
            mixture_components: self.mixture_components,
            train: self.optimizer.train_config(theta, self.stage_seed(STAGE_PROPENSITY, j)),
        }
    }

    fn sigma_config(&self, theta: f64, j: usize) -> SigmaConfig {
        SigmaConfig {
            hidden: self.sigma_hidden.clone(),
            train: self.sigma_optimizer.train_config(theta, self.stage_seed(STAGE_SIGMA, j)),
        }
    }

    pub fn risk_config(&self) -> RiskConfig {
        RiskConfig {
            hidden: self.risk_hidden.clone(),
            validation_fraction: self.validation_fraction,
            train: self.optimizer.train_config(0.0, self.stage_seed(STAGE_RISK, 0)),
        }
    }
}

/// Models and map fitted for one feature.
#[derive(Clone, Debug)]
pub struct FeatureArtifacts {
    pub propensity: PropensityFit,
    pub sigma: SigmaModel,
    pub map: AttributionMap,
}

#[derive(Clone, Debug)]
pub struct Distillation {
    pub lambda: f64,
    pub theta: f64,
    pub outcome: OutcomeFit,
    pub features: Vec<FeatureArtifacts>,
    pub distilled: Dataset,
    pub warnings: Vec<String>,
}

impl Distillation {
    pub fn maps(&self) -> Vec<AttributionMap> {
        self.features.iter().map(|f| f.map.clone()).collect()
    }

    pub fn map(&self, name: &str) -> Option<&AttributionMap> {
        self.features.iter().map(|f| &f.map).find(|m| m.feature == name)
    }
}

/// Runs `f` on a dedicated pool of `jobs` threads (0 means rayon's default).
pub fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn propensity_for(
    data: &Dataset,
    encoder: &Encoder,
    outcome: &OutcomeFit,
    config: &DistillConfig,
    theta: f64,
    j: usize,
) -> Result<PropensityFit> {
    let weights = adaptive_weights(&outcome.predictive_weights, j, config.gamma, config.w_max)?;
    fit_propensity(data, encoder, j, &weights, &config.propensity_config(theta, j))
}

fn fit_feature(
    data: &Dataset,
    encoder: &Encoder,
    outcome: &OutcomeFit,
    config: &DistillConfig,
    theta: f64,
    j: usize,
) -> Result<FeatureArtifacts> {
    let name = data.schema().features[j].name.as_str();
    let stage = |s: &'static str| move |e: Error| e.in_stage(s, Some(name));
    let propensity = propensity_for(data, encoder, outcome, config, theta, j).map_err(stage("propensity"))?;
    let reps = propensity.representations(data).map_err(stage("propensity"))?;
    // a feature the outcome screen dropped keeps no direct effect on sigma
    let value_weight = if outcome.predictive_weights[j] > 0.0 { 0.0 } else { config.w_max };
    let sigma =
        fit_sigma(data, &propensity, &reps, value_weight, &config.sigma_config(theta, j)).map_err(stage("sigma"))?;
    let map = response_curve(&sigma, &reps, data, config.grid_points, config.gradient_tolerance)
        .and_then(|m| m.with_baseline(config.baseline))
        .map_err(stage("attribution"))?;
    Ok(FeatureArtifacts { propensity, sigma, map })
}

fn check_input(data: &Dataset, config: &DistillConfig) -> Result<()> {
    if data.is_distilled() {
        return Err(Error::AlreadyDistilled);
    }
    config.validate()?;
    data.check_binary_labels().map_err(|e| e.in_stage("outcome", None))?;
    if data.n_features() < 2 {
        return Err(Error::InvalidInput("distillation needs at least two features".into()));
    }
    Ok(())
}

/// Group-Lasso outcome screen with the penalty `lambda_for(n, d)`.
pub fn screen_outcome(data: &Dataset, config: &DistillConfig) -> Result<(f64, OutcomeFit)> {
    check_input(data, config)?;
    let lambda = config.lambda_for(data.n_rows(), data.n_features());
    let outcome_cfg = config.optimizer.train_config(lambda, config.stage_seed(STAGE_OUTCOME, 0));
    let outcome = fit_outcome(data, &config.outcome_hidden, &outcome_cfg).map_err(|e| e.in_stage("outcome", None))?;
    log::info!("outcome weights {:?}", outcome.predictive_weights);
    Ok((lambda, outcome))
}

/// Adaptive propensity models of `features` after the outcome screen, with the
/// same seeds [`distill_dataset`] uses.
pub fn fit_propensities(
    data: &Dataset,
    config: &DistillConfig,
    features: &[usize],
) -> Result<(OutcomeFit, Vec<PropensityFit>)> {
    let (_, outcome) = screen_outcome(data, config)?;
    if let Some(&j) = features.iter().find(|&&j| j >= data.n_features()) {
        return Err(Error::InvalidInput(format!("feature index {j} out of range")));
    }
    let theta = config.theta_for(data.n_rows());
    let encoder = Encoder::fit(data);
    let fits = features
        .par_iter()
        .map(|&j| {
            let name = data.schema().features[j].name.as_str();
            propensity_for(data, &encoder, &outcome, config, theta, j).map_err(|e| e.in_stage("propensity", Some(name)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((outcome, fits))
}

/// Fits every stage on `data` and replaces each value by its attribution.
///
/// Per-feature work fans out over the current rayon pool; every feature has
/// its own seed, so the result does not depend on the number of threads.
pub fn distill_dataset(data: &Dataset, config: &DistillConfig) -> Result<Distillation> {
    let (lambda, outcome) = screen_outcome(data, config)?;
    let (n, d) = (data.n_rows(), data.n_features());
    let theta = config.theta_for(n);

    let encoder = Encoder::fit(data);
    let features = (0..d)
        .into_par_iter()
        .map(|j| fit_feature(data, &encoder, &outcome, config, theta, j))
        .collect::<Result<Vec<_>>>()?;
    let maps: Vec<AttributionMap> = features.iter().map(|f| f.map.clone()).collect();
    let (distilled, warnings) = apply_maps(&maps, data)?;
    Ok(Distillation {
        lambda,
        theta,
        outcome,
        features,
        distilled,
        warnings,
    })
}

/// Distils `data` with already fitted maps; labels are kept as they are.
pub fn apply_maps(maps: &[AttributionMap], data: &Dataset) -> Result<(Dataset, Vec<String>)> {
    if data.is_distilled() {
        return Err(Error::AlreadyDistilled);
    }
    let names = data.schema().names();
    if maps.len() != names.len() || maps.iter().zip(&names).any(|(m, n)| &m.feature != n) {
        return Err(Error::Schema("attribution maps do not match the dataset features".into()));
    }
    let mut warnings = BTreeSet::new();
    let mut values = Vec::with_capacity(data.values().len());
    for row in data.rows() {
        for (map, &x) in maps.iter().zip(row) {
            let (v, warning) = map.lookup(x);
            warnings.extend(warning);
            values.push(v);
        }
    }
    let features = maps
        .iter()
        .map(|m| {
            let (lo, hi) = m.cfa_range();
            FeatureSpec::continuous(m.feature.clone(), lo, hi)
        })
        .collect();
    let mut schema = Schema::new(features)?;
    schema.label = data.schema().label.clone();
    schema.distilled = true;
    let distilled = Dataset::new(schema, values, data.labels().to_vec())?;
    Ok((distilled, warnings.into_iter().collect()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSummary {
    pub feature: String,
    pub predictive_weight: f64,
    pub cfi: f64,
}

/// Deterministic metrics document of an end-to-end run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n_train: usize,
    pub n_test: usize,
    pub lambda: f64,
    pub theta: f64,
    pub features: Vec<FeatureSummary>,
    pub distilled: ClassifierMetrics,
    pub distilled_threshold: f64,
    pub raw_baseline: ClassifierMetrics,
    pub raw_threshold: f64,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct EndToEnd {
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
    pub distillation: Distillation,
    pub test_distilled: Dataset,
    pub classifier: RiskClassifier,
    pub baseline: RiskClassifier,
    pub report: MetricsReport,
}

/// Stratified split, distillation fitted on the training part only, and a
/// comparison of the distilled-input classifier against the same classifier
/// on raw features.
pub fn run_end_to_end(data: &Dataset, config: &DistillConfig) -> Result<EndToEnd> {
    config.validate()?;
    let (train_rows, test_rows) = data
        .stratified_split(config.test_fraction, config.stage_seed(STAGE_SPLIT, 0))
        .map_err(|e| e.in_stage("split", None))?;
    let train = data.subset(&train_rows);
    let test = data.subset(&test_rows);
    train.check_binary_labels().map_err(|e| e.in_stage("split", None))?;

    let distillation = distill_dataset(&train, config)?;
    let (test_distilled, test_warnings) = apply_maps(&distillation.maps(), &test)?;
    let risk = config.risk_config();
    let (classifier, baseline) = rayon::join(
        || fit_risk_classifier(&distillation.distilled, false, &risk),
        || fit_risk_classifier(&train, true, &risk),
    );
    let classifier = classifier.map_err(|e| e.in_stage("risk", None))?;
    let baseline = baseline.map_err(|e| e.in_stage("baseline", None))?;

    let mut warnings = distillation.warnings.clone();
    warnings.extend(test_warnings);
    warnings.sort();
    warnings.dedup();
    let report = MetricsReport {
        n_train: train.n_rows(),
        n_test: test.n_rows(),
        lambda: distillation.lambda,
        theta: distillation.theta,
        features: distillation
            .features
            .iter()
            .zip(&distillation.outcome.predictive_weights)
            .map(|(f, &w)| FeatureSummary {
                feature: f.map.feature.clone(),
                predictive_weight: w,
                cfi: f.map.cfi,
            })
            .collect(),
        distilled: classifier.evaluate(&test_distilled)?,
        distilled_threshold: classifier.threshold,
        raw_baseline: baseline.evaluate(&test)?,
        raw_threshold: baseline.threshold,
        warnings,
    };
    Ok(EndToEnd {
        train_rows,
        test_rows,
        distillation,
        test_distilled,
        classifier,
        baseline,
        report,
    })
}
