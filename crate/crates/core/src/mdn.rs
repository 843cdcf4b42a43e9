//! Gaussian mixture parameters emitted by a mixture-density head.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Floor applied to every component standard deviation.
pub const SIGMA_MIN: f64 = 1e-3;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureDensityParams {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

impl MixtureDensityParams {
    pub fn new(weights: Vec<f64>, means: Vec<f64>, sds: Vec<f64>) -> Result<Self> {
        let params = Self { weights, means, sds };
        params.validate()?;
        Ok(params)
    }

    /// Maps raw head outputs `[weight logits | means | raw sds]` onto valid parameters.
    pub fn from_logits(logits: &[f64]) -> Self {
        let m = logits.len() / 3;
        let weights = softmax(&logits[..m]);
        let means = logits[m..2 * m].to_vec();
        let sds = logits[2 * m..3 * m]
            .iter()
            .map(|&raw| SIGMA_MIN + softplus(raw))
            .collect();
        Self { weights, means, sds }
    }

    pub fn components(&self) -> usize {
        self.weights.len()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.weights.len();
        if m == 0 || self.means.len() != m || self.sds.len() != m {
            return Err(Error::InvalidInput(
                "mixture needs matching, non-empty weight/mean/sd vectors".into(),
            ));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 || self.weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidInput(format!(
                "mixture weights must form a simplex (sum {total})"
            )));
        }
        if self.sds.iter().any(|s| !(*s >= SIGMA_MIN) || !s.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "mixture standard deviations must be >= {SIGMA_MIN}"
            )));
        }
        if self.means.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidInput("mixture means must be finite".into()));
        }
        Ok(())
    }

    /// Per-component `ln(w_m) + ln N(x; mu_m, sd_m)`.
    fn component_log_terms(&self, x: f64) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.means)
            .zip(&self.sds)
            .map(|((&w, &mu), &sd)| {
                let z = (x - mu) / sd;
                w.ln() - 0.5 * z * z - sd.ln() - LN_SQRT_2PI
            })
            .collect()
    }

    pub fn log_density(&self, x: f64) -> f64 {
        log_sum_exp(&self.component_log_terms(x))
    }

    pub fn density(&self, x: f64) -> f64 {
        self.log_density(x).exp()
    }

    pub fn mean(&self) -> f64 {
        self.weights.iter().zip(&self.means).map(|(w, m)| w * m).sum()
    }

    /// Posterior component responsibilities at `x`.
    pub fn responsibilities(&self, x: f64) -> Vec<f64> {
        let terms = self.component_log_terms(x);
        let lse = log_sum_exp(&terms);
        terms.iter().map(|t| (t - lse).exp()).collect()
    }
}

/// Negative log-likelihood `-ln sum_m w_m N(x; mu_m, sd_m)`.
pub fn mdn_nll(params: &MixtureDensityParams, x: f64) -> f64 {
    -params.log_density(x)
}

/// NLL of `x` under the mixture encoded by `logits`, writing d(NLL)/d(logits) into `grad`.
pub(crate) fn nll_and_grad(logits: &[f64], x: f64, grad: &mut [f64]) -> f64 {
    let m = logits.len() / 3;
    let params = MixtureDensityParams::from_logits(logits);
    let terms = params.component_log_terms(x);
    let lse = log_sum_exp(&terms);
    for k in 0..m {
        let resp = (terms[k] - lse).exp();
        let mu = params.means[k];
        let sd = params.sds[k];
        let diff = x - mu;
        grad[k] = params.weights[k] - resp;
        grad[m + k] = -resp * diff / (sd * sd);
        let d_sd = resp * (1.0 / sd - diff * diff / (sd * sd * sd));
        grad[2 * m + k] = d_sd * sigmoid(logits[2 * m + k]);
    }
    -lse
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

pub(crate) fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn standard() -> MixtureDensityParams {
        MixtureDensityParams::new(vec![1.0], vec![0.0], vec![1.0]).unwrap()
    }

    #[test]
    fn standard_normal_density_and_nll() {
        let p = standard();
        assert!((p.density(0.0) - 0.398_942_280_401_432_7).abs() < 1e-12);
        assert!((mdn_nll(&p, 0.0) - 0.5 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-12);
    }

    #[test]
    fn duplicated_component_matches_single() {
        let p = MixtureDensityParams::new(vec![0.5, 0.5], vec![0.3, 0.3], vec![1.2, 1.2]).unwrap();
        let q = MixtureDensityParams::new(vec![1.0], vec![0.3], vec![1.2]).unwrap();
        for x in [-2.0, 0.0, 0.3, 1.7] {
            assert!((p.density(x) - q.density(x)).abs() < 1e-14);
        }
    }

    #[test]
    fn nll_bounded_by_each_component() {
        let p = MixtureDensityParams::new(vec![0.2, 0.3, 0.5], vec![-1.0, 0.0, 2.0], vec![0.5, 1.0, 2.0])
            .unwrap();
        let x = 0.7;
        let nll = mdn_nll(&p, x);
        for m in 0..3 {
            let single = MixtureDensityParams::new(vec![1.0], vec![p.means[m]], vec![p.sds[m]]).unwrap();
            assert!(nll <= -(p.weights[m].ln() + single.log_density(x)) + 1e-12);
        }
    }

    #[test]
    fn rejects_bad_params() {
        assert!(MixtureDensityParams::new(vec![0.4, 0.4], vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(MixtureDensityParams::new(vec![1.0], vec![0.0], vec![1e-4]).is_err());
        assert!(MixtureDensityParams::new(vec![], vec![], vec![]).is_err());
    }

    #[test]
    fn from_logits_respects_floor_and_simplex() {
        let p = MixtureDensityParams::from_logits(&[0.0, 3.0, -1.0, 2.0, -50.0, 0.0]);
        assert!(p.validate().is_ok());
        assert!(p.sds[0] >= SIGMA_MIN);
    }

    #[test]
    fn density_integrates_to_one() {
        let p = MixtureDensityParams::new(vec![0.3, 0.7], vec![-1.0, 2.0], vec![0.4, 1.5]).unwrap();
        let lo = -1.0 - 8.0 * 1.5;
        let hi = 2.0 + 8.0 * 1.5;
        let steps = 20_000;
        let h = (hi - lo) / steps as f64;
        // Simpson's rule
        let mut acc = p.density(lo) + p.density(hi);
        for i in 1..steps {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * p.density(lo + i as f64 * h);
        }
        assert!((acc * h / 3.0 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn nll_gradient_matches_finite_differences() {
        let logits = [0.2, -0.4, 0.1, 0.5, -0.7, 1.1, 0.3, -0.2, 0.4];
        let x = 0.35;
        let mut grad = vec![0.0; 9];
        nll_and_grad(&logits, x, &mut grad);
        let h = 1e-5;
        for i in 0..9 {
            let mut up = logits;
            let mut dn = logits;
            up[i] += h;
            dn[i] -= h;
            let mut scratch = vec![0.0; 9];
            let fd = (nll_and_grad(&up, x, &mut scratch) - nll_and_grad(&dn, x, &mut scratch)) / (2.0 * h);
            let rel = (fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-8);
            assert!(rel < 1e-4, "param {i}: fd {fd} vs analytic {}", grad[i]);
        }
    }
}
