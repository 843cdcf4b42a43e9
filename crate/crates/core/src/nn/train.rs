use log::debug;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{GroupedNet, LossKind, NetGradient, Samples, Scratch};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Group-Lasso strength (`lambda` for the outcome screen, `theta` for propensity models).
    pub penalty: f64,
    pub seed: u64,
    /// Minimum epoch-average improvement that resets the stall counter.
    pub tolerance: f64,
    /// Consecutive stalled epochs before stopping.
    pub patience: usize,
    /// Ridge strength on the weights of every layer after the first. Without it
    /// the network can dodge the first-layer penalty by rescaling.
    #[serde(default)]
    pub weight_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            epochs: 300,
            batch_size: 64,
            penalty: 0.0,
            seed: 0,
            tolerance: 1e-6,
            patience: 20,
            weight_decay: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidInput("learning rate must be positive".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidInput("epochs and batch size must be positive".into()));
        }
        if !(self.penalty >= 0.0) || !self.penalty.is_finite() {
            return Err(Error::InvalidInput("penalty must be finite and non-negative".into()));
        }
        if !(self.weight_decay >= 0.0) || !self.weight_decay.is_finite() {
            return Err(Error::InvalidInput("weight decay must be finite and non-negative".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidInput("tolerance must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Epoch-average penalised objective.
    pub loss_trace: Vec<f64>,
    pub epochs_run: usize,
    pub stopped_early: bool,
}

/// Group soft-threshold: `max(0, 1 - t/||v||) * v`.
pub fn group_lasso_prox(v: &[f64], threshold: f64) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if threshold <= 0.0 {
        return v.to_vec();
    }
    if norm <= threshold {
        return vec![0.0; v.len()];
    }
    let scale = 1.0 - threshold / norm;
    v.iter().map(|x| x * scale).collect()
}

fn prox_threshold(learning_rate: f64, penalty: f64, weight: f64) -> f64 {
    if penalty == 0.0 || weight == 0.0 {
        0.0
    } else {
        learning_rate * penalty * weight
    }
}

/// Proximal mini-batch gradient descent on `loss + penalty * sum_j w_j ||beta_j||`.
///
/// Each step takes a gradient step on the smooth loss and then soft-thresholds
/// every first-layer group with `learning_rate * penalty * w_j`. A weight of
/// `f64::INFINITY` zeroes its group on the first step whenever `penalty > 0`.
pub fn train(
    mut net: GroupedNet,
    samples: &Samples,
    loss: LossKind,
    config: &TrainConfig,
    group_weights: &[f64],
) -> Result<(GroupedNet, TrainReport)> {
    config.validate()?;
    net.check_samples(samples, loss)?;
    if group_weights.len() != net.groups().len() {
        return Err(Error::DimensionMismatch {
            what: "group penalty weights",
            expected: net.groups().len(),
            found: group_weights.len(),
        });
    }
    if group_weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::InvalidInput("group penalty weights must be non-negative".into()));
    }
    let thresholds: Vec<f64> = group_weights
        .iter()
        .map(|&w| prox_threshold(config.learning_rate, config.penalty, w))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut grad = NetGradient::zeros_like(&net);
    let mut scratch = Scratch::new(&net);
    let mut report = TrainReport {
        loss_trace: Vec::with_capacity(config.epochs),
        epochs_run: 0,
        stopped_early: false,
    };
    let mut best = f64::INFINITY;
    let mut stalled = 0;

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for batch in order.chunks(config.batch_size) {
            let value = net.batch_loss_and_grad(samples, batch, loss, &mut scratch, &mut grad);
            if !value.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            epoch_loss += value;
            batches += 1;
            if config.weight_decay > 0.0 {
                for (g, w) in grad.weights.iter_mut().zip(net.weights.iter()).skip(1) {
                    for (gi, wi) in g.iter_mut().zip(w) {
                        *gi += config.weight_decay * wi;
                    }
                }
            }
            net.sgd_step(&grad, config.learning_rate);
            net.prox_first_layer(&thresholds);
            if !net.all_finite() {
                return Err(Error::Diverged { epoch });
            }
        }
        let penalty_term: f64 = net
            .group_norms()
            .iter()
            .zip(group_weights)
            .filter(|(norm, _)| **norm > 0.0)
            .map(|(norm, w)| norm * w)
            .sum::<f64>()
            * config.penalty;
        let ridge_term = 0.5
            * config.weight_decay
            * net.weights.iter().skip(1).flatten().map(|w| w * w).sum::<f64>();
        let objective = epoch_loss / batches as f64 + penalty_term + ridge_term;
        if !objective.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        report.loss_trace.push(objective);
        report.epochs_run = epoch + 1;
        if best - objective < config.tolerance {
            stalled += 1;
        } else {
            stalled = 0;
        }
        best = best.min(objective);
        if stalled >= config.patience {
            report.stopped_early = true;
            debug!("early stop at epoch {epoch} (objective {objective:.6})");
            break;
        }
    }
    Ok((net, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Head, Samples};
    use rand::Rng;

    #[test]
    fn prox_closed_form() {
        let out = group_lasso_prox(&[3.0, 4.0], 2.0);
        assert!((out[0] - 1.8).abs() < 1e-15 && (out[1] - 2.4).abs() < 1e-15);
        assert_eq!(group_lasso_prox(&[0.3, 0.4], 2.0), vec![0.0, 0.0]);
        assert_eq!(group_lasso_prox(&[0.3, -0.4, 9.0], 0.0), vec![0.3, -0.4, 9.0]);
        assert_eq!(group_lasso_prox(&[0.0, 0.0], 1.0), vec![0.0, 0.0]);
    }

    fn single_cause_samples(n: usize, seed: u64) -> Samples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut inputs = Vec::with_capacity(n * 5);
        let mut targets = Vec::with_capacity(n);
        for _ in 0..n {
            let row: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
            targets.push(2.0 * row[0]);
            inputs.extend(row);
        }
        Samples::new(inputs, 5, targets, 1).unwrap()
    }

    #[test]
    fn zero_penalty_is_plain_gradient_descent() {
        let samples = single_cause_samples(64, 3);
        let net = GroupedNet::with_singleton_groups(vec![5, 4, 1], Head::Linear, 1).unwrap();
        let config = TrainConfig {
            epochs: 1,
            batch_size: 64,
            penalty: 0.0,
            ..TrainConfig::default()
        };
        let (trained, _) = train(net.clone(), &samples, LossKind::SquaredError, &config, &[1.0; 5]).unwrap();
        let (_, grad) = net.loss_and_grad(&samples, LossKind::SquaredError).unwrap();
        let expected: Vec<f64> = net
            .params_flat()
            .iter()
            .zip(grad.flatten())
            .map(|(p, g)| p - 0.01 * g)
            .collect();
        for (a, b) in trained.params_flat().iter().zip(&expected) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn infinite_weight_kills_group_for_good() {
        let samples = single_cause_samples(256, 4);
        let net = GroupedNet::with_singleton_groups(vec![5, 8, 1], Head::Linear, 2).unwrap();
        let config = TrainConfig {
            epochs: 20,
            penalty: 0.01,
            ..TrainConfig::default()
        };
        let weights = [f64::INFINITY, 1.0, 1.0, 1.0, 1.0];
        let (trained, _) = train(net, &samples, LossKind::SquaredError, &config, &weights).unwrap();
        assert_eq!(trained.group_norms()[0], 0.0);
        assert!(trained.weights(0).iter().step_by(5).all(|w| *w == 0.0));
    }

    #[test]
    fn group_lasso_isolates_the_single_cause() {
        let samples = single_cause_samples(2000, 5);
        let net = GroupedNet::with_singleton_groups(vec![5, 16, 1], Head::Linear, 3).unwrap();
        let config = TrainConfig {
            epochs: 100,
            penalty: 0.05,
            ..TrainConfig::default()
        };
        let (trained, report) = train(net, &samples, LossKind::SquaredError, &config, &[1.0; 5]).unwrap();
        let norms = trained.group_norms();
        let others = norms[1..].iter().copied().fold(0.0, f64::max);
        assert!(norms[0] > 10.0 * others, "norms {norms:?}");
        assert!(report.loss_trace.last().unwrap() < &report.loss_trace[0]);
    }

    #[test]
    fn identical_inputs_give_identical_fits() {
        let samples = single_cause_samples(300, 6);
        let config = TrainConfig {
            epochs: 5,
            penalty: 0.02,
            seed: 77,
            ..TrainConfig::default()
        };
        let run = || {
            let net = GroupedNet::with_singleton_groups(vec![5, 6, 1], Head::Linear, 8).unwrap();
            train(net, &samples, LossKind::SquaredError, &config, &[1.0; 5]).unwrap().0
        };
        let a = run().params_flat();
        let b = run().params_flat();
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn rejects_wrong_weight_count() {
        let samples = single_cause_samples(10, 1);
        let net = GroupedNet::with_singleton_groups(vec![5, 2, 1], Head::Linear, 0).unwrap();
        let err = train(net, &samples, LossKind::SquaredError, &TrainConfig::default(), &[1.0; 3]);
        assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn exploding_rate_reports_divergence() {
        let samples = single_cause_samples(64, 2);
        let net = GroupedNet::with_singleton_groups(vec![5, 1], Head::Linear, 0).unwrap();
        let config = TrainConfig {
            learning_rate: 1e3,
            epochs: 500,
            patience: 1000,
            ..TrainConfig::default()
        };
        let err = train(net, &samples, LossKind::SquaredError, &config, &[1.0; 5]);
        assert!(matches!(err, Err(Error::Diverged { .. })), "{err:?}");
    }
}
