//! Causal response curves and the attributions derived from them.
//!
//! For a feature `j` the sigma model regresses `Y` on `(x_j, r(x_{-j}))`, where
//! `r` is the propensity representation. Averaging `sigma(x, r_i)` over every
//! unit at one fixed level `x` gives the interventional expectation `mu(x)`.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureKind, FeatureSpec};
use crate::encode::ColumnEncoding;
use crate::error::{Error, Result};
use crate::mdn::sigmoid;
use crate::nn::{train, GroupedNet, Head, LossKind, Samples, Scratch, TrainConfig, TrainReport};
use crate::outcome::init_output_bias;
use crate::propensity::PropensityFit;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SigmaConfig {
    pub hidden: Vec<usize>,
    pub train: TrainConfig,
}

impl Default for SigmaConfig {
    fn default() -> Self {
        Self {
            hidden: vec![32, 32],
            train: TrainConfig::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SigmaModel {
    pub feature: usize,
    pub spec: FeatureSpec,
    pub value_encoding: ColumnEncoding,
    pub net: GroupedNet,
    pub report: TrainReport,
}

/// Fits `sigma(x_j, r)` by log-loss on the observed labels.
///
/// `reps` holds the row-major representations of `data` under `propensity`.
/// The encoded `x_j` columns form one penalised group with weight
/// `value_weight` (threshold `config.train.penalty * value_weight`); the
/// representation inputs are unpenalised. Constant labels are accepted and
/// give a constant model.
pub fn fit_sigma(
    data: &Dataset,
    propensity: &PropensityFit,
    reps: &[f64],
    value_weight: f64,
    config: &SigmaConfig,
) -> Result<SigmaModel> {
    let j = propensity.target;
    let r = propensity.representation_dim();
    let n = data.n_rows();
    if n == 0 {
        return Err(Error::EmptyBatch);
    }
    if reps.len() != n * r {
        return Err(Error::DimensionMismatch {
            what: "representations",
            expected: n * r,
            found: reps.len(),
        });
    }
    let value_encoding = propensity.encoder.columns()[j].clone();
    let vw = value_encoding.width();
    let width = vw + r;
    let mut inputs = Vec::with_capacity(n * width);
    for (row, rep) in data.rows().zip(reps.chunks(r)) {
        value_encoding.encode_into(row[j], &mut inputs);
        inputs.extend_from_slice(rep);
    }
    let targets = data.labels().iter().map(|&y| f64::from(y)).collect();
    let samples = Samples::new(inputs, width, targets, 1)?;

    let mut groups = vec![(0..vw).collect::<Vec<_>>()];
    groups.extend((vw..width).map(|c| vec![c]));
    let mut weights = vec![0.0; groups.len()];
    weights[0] = value_weight;
    let dims: Vec<usize> = std::iter::once(width).chain(config.hidden.iter().copied()).chain([1]).collect();
    let mut net = GroupedNet::new(dims, Head::Sigmoid, groups, config.train.seed)?;
    init_output_bias(&mut net, data.labels());
    let (net, report) = train(net, &samples, LossKind::CrossEntropy, &config.train, &weights)?;
    Ok(SigmaModel {
        feature: j,
        spec: propensity.spec.clone(),
        value_encoding,
        net,
        report,
    })
}

impl SigmaModel {
    pub fn predict(&self, value: f64, rep: &[f64]) -> Result<f64> {
        let mut x = Vec::with_capacity(self.net.input_dim());
        self.value_encoding.encode_into(value, &mut x);
        x.extend_from_slice(rep);
        Ok(sigmoid(self.net.forward(&x)?.logits[0]))
    }

    /// `mu(value) = mean_i sigma(value, r_i)` over the given representations.
    pub fn causal_expectation(&self, reps: &[f64], value: f64) -> Result<f64> {
        self.spec.check_value(value)?;
        let vw = self.value_encoding.width();
        let r = self.net.input_dim() - vw;
        if r == 0 || reps.is_empty() || reps.len() % r != 0 {
            return Err(Error::DimensionMismatch {
                what: "representations",
                expected: r,
                found: reps.len(),
            });
        }
        let mut x = Vec::with_capacity(vw + r);
        self.value_encoding.encode_into(value, &mut x);
        let mut scratch = Scratch::new(&self.net);
        let mut sum = 0.0;
        for rep in reps.chunks(r) {
            x.truncate(vw);
            x.extend_from_slice(rep);
            self.net.forward_into(&x, &mut scratch);
            sum += sigmoid(scratch.logits()[0]);
        }
        Ok(sum / (reps.len() / r) as f64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientLabel {
    Positive,
    Negative,
    Neutral,
}

impl GradientLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            GradientLabel::Positive => "positive",
            GradientLabel::Negative => "negative",
            GradientLabel::Neutral => "neutral",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Baseline {
    /// Attribution equals the curve.
    #[default]
    Zero,
    /// A fixed probability cut-off, usually 0.5.
    DecisionBoundary { threshold: f64 },
    /// The curve's value at an expert-chosen feature value.
    Expert { value: f64 },
    /// The uniform average of the curve over the grid.
    CurveMean,
}

/// Response curve of one feature with its summary statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributionMap {
    pub feature: String,
    pub index: usize,
    pub kind: FeatureKind,
    pub grid: Vec<f64>,
    pub mu: Vec<f64>,
    /// Whether each grid level was seen when the map was fitted (all true for continuous features).
    pub observed: Vec<bool>,
    pub cfi: f64,
    pub gradient_labels: Vec<GradientLabel>,
    pub gradient_tolerance: f64,
    pub baseline: Baseline,
    pub baseline_value: f64,
}

/// `mean(mu) - min(mu)`: the expected lift over the worst level under a uniform
/// distribution on the grid.
pub fn causal_feature_importance(mu: &[f64]) -> f64 {
    if mu.is_empty() {
        return 0.0;
    }
    let mean = mu.iter().sum::<f64>() / mu.len() as f64;
    let min = mu.iter().copied().fold(f64::INFINITY, f64::min);
    if mu.iter().all(|&m| m == min) {
        return 0.0;
    }
    (mean - min).max(0.0)
}

/// Sign of each adjacent finite-difference slope against tolerance `tau`.
pub fn local_causal_gradient(grid: &[f64], mu: &[f64], tau: f64) -> Result<Vec<GradientLabel>> {
    if grid.len() < 2 || grid.len() != mu.len() {
        return Err(Error::InvalidInput("gradient needs at least two grid points".into()));
    }
    Ok(grid
        .windows(2)
        .zip(mu.windows(2))
        .map(|(g, m)| {
            let slope = (m[1] - m[0]) / (g[1] - g[0]);
            if slope > tau {
                GradientLabel::Positive
            } else if slope < -tau {
                GradientLabel::Negative
            } else {
                GradientLabel::Neutral
            }
        })
        .collect())
}

/// All levels for discrete features, `points` evenly spaced values over the
/// observed range for continuous ones (endpoints exact).
pub fn feature_grid(spec: &FeatureSpec, column: &[f64], points: usize) -> Result<Vec<f64>> {
    match spec.kind {
        FeatureKind::Binary => Ok(vec![0.0, 1.0]),
        FeatureKind::Categorical { levels } => Ok((0..levels).map(|k| k as f64).collect()),
        FeatureKind::Continuous => {
            if points < 2 {
                return Err(Error::InvalidInput("grid needs at least two points".into()));
            }
            let lo = column.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = column.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !(lo < hi) {
                return Err(Error::DegenerateFeature {
                    feature: spec.name.clone(),
                });
            }
            let step = (hi - lo) / (points - 1) as f64;
            let mut grid: Vec<f64> = (0..points).map(|k| lo + step * k as f64).collect();
            grid[points - 1] = hi;
            Ok(grid)
        }
    }
}

/// Grid, `mu` on the grid, CFI and gradient labels; the baseline is zero.
pub fn response_curve(
    sigma: &SigmaModel,
    reps: &[f64],
    data: &Dataset,
    grid_points: usize,
    gradient_tolerance: f64,
) -> Result<AttributionMap> {
    let j = sigma.feature;
    let column = data.column(j);
    let grid = feature_grid(&sigma.spec, &column, grid_points)?;
    let mu = grid
        .iter()
        .map(|&x| sigma.causal_expectation(reps, x))
        .collect::<Result<Vec<_>>>()?;
    let observed = if sigma.spec.kind.is_discrete() {
        grid.iter().map(|g| column.contains(g)).collect()
    } else {
        vec![true; grid.len()]
    };
    AttributionMap::new(sigma.spec.clone(), j, grid, mu, observed, gradient_tolerance)
}

impl AttributionMap {
    pub fn new(
        spec: FeatureSpec,
        index: usize,
        grid: Vec<f64>,
        mu: Vec<f64>,
        observed: Vec<bool>,
        gradient_tolerance: f64,
    ) -> Result<Self> {
        if grid.len() != mu.len() || grid.len() != observed.len() {
            return Err(Error::InvalidInput("grid, mu and observed flags differ in length".into()));
        }
        if grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidInput("grid must be strictly increasing".into()));
        }
        let gradient_labels = local_causal_gradient(&grid, &mu, gradient_tolerance)?;
        Ok(Self {
            feature: spec.name,
            index,
            kind: spec.kind,
            cfi: causal_feature_importance(&mu),
            grid,
            mu,
            observed,
            gradient_labels,
            gradient_tolerance,
            baseline: Baseline::Zero,
            baseline_value: 0.0,
        })
    }

    pub fn curve_mean(&self) -> f64 {
        self.mu.iter().sum::<f64>() / self.mu.len() as f64
    }

    /// `mu` at `x`: exact level for discrete features, clamped linear
    /// interpolation for continuous ones. `None` for a level not on the grid.
    pub fn mu_at(&self, x: f64) -> Option<f64> {
        if self.kind.is_discrete() {
            return self.grid.iter().position(|&g| g == x).map(|k| self.mu[k]);
        }
        let last = self.grid.len() - 1;
        if !(x > self.grid[0]) {
            return Some(self.mu[0]);
        }
        if x >= self.grid[last] {
            return Some(self.mu[last]);
        }
        let k = self.grid.partition_point(|&g| g <= x) - 1;
        let t = (x - self.grid[k]) / (self.grid[k + 1] - self.grid[k]);
        Some(self.mu[k] + t * (self.mu[k + 1] - self.mu[k]))
    }

    pub fn resolve_baseline(&self, baseline: Baseline) -> Result<f64> {
        match baseline {
            Baseline::Zero => Ok(0.0),
            Baseline::DecisionBoundary { threshold } => Ok(threshold),
            Baseline::CurveMean => Ok(self.curve_mean()),
            Baseline::Expert { value } => {
                let inside = value >= self.grid[0] && value <= self.grid[self.grid.len() - 1];
                match self.mu_at(value) {
                    Some(mu) if inside => Ok(mu),
                    _ => Err(Error::OutOfDomain {
                        feature: self.feature.clone(),
                        value,
                    }),
                }
            }
        }
    }

    pub fn with_baseline(mut self, baseline: Baseline) -> Result<Self> {
        self.baseline_value = self.resolve_baseline(baseline)?;
        self.baseline = baseline;
        Ok(self)
    }

    /// CFA on the grid under the map's baseline.
    pub fn cfa(&self) -> Vec<f64> {
        self.mu.iter().map(|m| m - self.baseline_value).collect()
    }

    /// Distilled value of a raw feature value, plus a warning for levels not
    /// seen when fitting (those map to the curve mean).
    pub fn lookup(&self, x: f64) -> (f64, Option<String>) {
        let seen = !self.kind.is_discrete()
            || self.grid.iter().zip(&self.observed).any(|(&g, &o)| g == x && o);
        match self.mu_at(x) {
            Some(mu) if seen => (mu - self.baseline_value, None),
            _ => (
                self.curve_mean() - self.baseline_value,
                Some(format!("{}: unseen level {x} mapped to the curve mean", self.feature)),
            ),
        }
    }

    /// Smallest and largest value `lookup` can return.
    pub fn cfa_range(&self) -> (f64, f64) {
        let cfa = self.cfa();
        let lo = cfa.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = cfa.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }
}

/// CFA on the grid of `map` under an arbitrary baseline.
pub fn causal_feature_attribution(map: &AttributionMap, baseline: Baseline) -> Result<Vec<f64>> {
    let b = map.resolve_baseline(baseline)?;
    Ok(map.mu.iter().map(|m| m - b).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn map(kind: FeatureKind, grid: Vec<f64>, mu: Vec<f64>) -> AttributionMap {
        let spec = FeatureSpec {
            name: "x".into(),
            kind,
            domain: (grid[0], grid[grid.len() - 1]),
        };
        let n = grid.len();
        AttributionMap::new(spec, 0, grid, mu, vec![true; n], 0.01).unwrap()
    }

    #[test]
    fn cfi_examples() {
        assert_eq!(causal_feature_importance(&[0.3, 0.3, 0.3]), 0.0);
        assert!((causal_feature_importance(&[0.2, 0.6]) - 0.2).abs() < 1e-15);
        let g: Vec<f64> = (0..=20).map(|k| k as f64 / 20.0).collect();
        assert!((causal_feature_importance(&g) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn gradient_examples() {
        use GradientLabel::*;
        let grid = [0.0, 1.0, 2.0];
        assert_eq!(local_causal_gradient(&grid, &[0.2, 0.5, 0.5], 0.01).unwrap(), vec![Positive, Neutral]);
        assert_eq!(local_causal_gradient(&grid, &[0.9, 0.5, 0.1], 0.01).unwrap(), vec![Negative, Negative]);
        assert_eq!(local_causal_gradient(&grid, &[0.4; 3], 0.01).unwrap(), vec![Neutral, Neutral]);
        assert!(local_causal_gradient(&[0.0], &[0.1], 0.01).is_err());
    }

    #[test]
    fn grid_construction() {
        let spec = FeatureSpec::continuous("x", -5.0, 5.0);
        let col = [0.3, -1.7, 2.9, 0.0];
        let g = feature_grid(&spec, &col, 21).unwrap();
        assert_eq!(g.len(), 21);
        assert_eq!((g[0], g[20]), (-1.7, 2.9));
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(feature_grid(&FeatureSpec::binary("b"), &[0.0], 21).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn baselines() {
        let m = map(FeatureKind::Continuous, vec![0.0, 1.0, 2.0], vec![0.2, 0.4, 0.9]);
        assert_eq!(causal_feature_attribution(&m, Baseline::Zero).unwrap(), m.mu);
        let centred = causal_feature_attribution(&m, Baseline::CurveMean).unwrap();
        assert!(centred.iter().sum::<f64>().abs() < 1e-12);
        let m = m.with_baseline(Baseline::Expert { value: 0.5 }).unwrap();
        assert!(m.lookup(0.5).0.abs() < 1e-15);
        assert!(m.resolve_baseline(Baseline::Expert { value: 3.0 }).is_err());
        assert_eq!(m.resolve_baseline(Baseline::DecisionBoundary { threshold: 0.5 }).unwrap(), 0.5);
    }

    #[test]
    fn discrete_lookup_and_unseen_levels() {
        let spec = FeatureSpec::categorical("c", 3);
        let m = AttributionMap::new(spec, 0, vec![0.0, 1.0, 2.0], vec![0.1, 0.2, 0.6], vec![true, true, false], 0.01)
            .unwrap();
        assert_eq!(m.lookup(1.0), (0.2, None));
        let (v, warn) = m.lookup(2.0);
        assert!((v - 0.3).abs() < 1e-12);
        assert!(warn.is_some());
    }

    #[test]
    fn continuous_lookup_clamps_and_interpolates() {
        let m = map(FeatureKind::Continuous, vec![0.0, 1.0, 2.0], vec![0.2, 0.4, 0.9]);
        assert_eq!(m.lookup(-4.0).0, 0.2);
        assert_eq!(m.lookup(7.0).0, 0.9);
        assert!((m.lookup(1.5).0 - 0.65).abs() < 1e-12);
        assert_eq!(m.lookup(1.0).0, 0.4);
    }

    proptest! {
        #[test]
        fn cfi_nonnegative_and_zero_iff_flat(mu in proptest::collection::vec(0.0f64..1.0, 2..30)) {
            let cfi = causal_feature_importance(&mu);
            prop_assert!(cfi >= 0.0);
            let flat = mu.iter().all(|&m| m == mu[0]);
            prop_assert_eq!(cfi == 0.0, flat);
        }

        #[test]
        fn curve_mean_cfa_is_centred(mu in proptest::collection::vec(0.0f64..1.0, 2..30)) {
            let grid: Vec<f64> = (0..mu.len()).map(|k| k as f64).collect();
            let m = map(FeatureKind::Continuous, grid, mu);
            let cfa = causal_feature_attribution(&m, Baseline::CurveMean).unwrap();
            prop_assert!((cfa.iter().sum::<f64>() / cfa.len() as f64).abs() < 1e-12);
        }

        #[test]
        fn lookup_stays_in_range(mu in proptest::collection::vec(0.0f64..1.0, 2..10), x in -5.0f64..15.0) {
            let grid: Vec<f64> = (0..mu.len()).map(|k| k as f64).collect();
            let m = map(FeatureKind::Continuous, grid, mu);
            let (lo, hi) = m.cfa_range();
            let v = m.lookup(x).0;
            prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
        }
    }
}
