//! Run configuration: a strict JSON file, overridden by flags and environment.

use std::path::{Path, PathBuf};

use causal_distill::pipeline::DistillConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    /// Significance level of the class-difference screen.
    pub alpha: Option<f64>,
    pub distill: DistillConfig,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        let config: Self = serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("config {}: {e}", path.display())))?;
        Ok(config)
    }

    /// Distillation settings with the effective seed applied.
    pub fn resolved(&self, seed: Option<u64>) -> Result<DistillConfig, CliError> {
        let mut distill = self.distill.clone();
        if let Some(seed) = seed.or(self.seed) {
            distill.seed = seed;
        }
        distill.validate().map_err(|e| CliError::config(e.to_string()))?;
        Ok(distill)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(0.05)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let err = serde_json::from_str::<RunConfig>(r#"{"sed": 3}"#).unwrap_err();
        assert!(err.to_string().contains("unknown field"));
        let err = serde_json::from_str::<RunConfig>(r#"{"distill": {"lamda": 1.0}}"#).unwrap_err();
        assert!(err.to_string().contains("unknown field"));
    }

    #[test]
    fn partial_config_keeps_defaults() {
        let c: RunConfig = serde_json::from_str(r#"{"seed": 4, "distill": {"grid_points": 11}}"#).unwrap();
        let d = c.resolved(None).unwrap();
        assert_eq!((d.seed, d.grid_points), (4, 11));
        assert_eq!(d.mixture_components, DistillConfig::default().mixture_components);
        assert_eq!(c.resolved(Some(9)).unwrap().seed, 9);
    }
}
