//! Versioned JSON model documents with bit-exact floats.
//!
//! Every float is written as the 16-digit hex of its IEEE-754 bit pattern,
//! so a save/load cycle reproduces the parameters exactly.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Activation, GroupedNet, Head, TrainConfig};
use crate::error::{Error, Result};

pub const MODEL_FORMAT: &str = "causal-distill/grouped-net";
pub const MODEL_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub format: String,
    pub version: u32,
    pub layer_dims: Vec<usize>,
    pub activation: Activation,
    pub head: Head,
    pub groups: Vec<Vec<usize>>,
    pub seed: u64,
    pub config: Option<TrainConfig>,
    #[serde(with = "hex_matrix")]
    pub weights: Vec<Vec<f64>>,
    #[serde(with = "hex_matrix")]
    pub biases: Vec<Vec<f64>>,
    /// Free-form model-specific metadata (scalers, thresholds, feature names).
    #[serde(default)]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

impl ModelDocument {
    pub fn from_net(net: &GroupedNet, config: Option<&TrainConfig>) -> Self {
        Self {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            layer_dims: net.layer_dims.clone(),
            activation: net.activation,
            head: net.head,
            groups: net.groups.clone(),
            seed: net.seed,
            config: config.cloned(),
            weights: net.weights.clone(),
            biases: net.biases.clone(),
            extra: serde_json::Map::new(),
        }
    }

    pub fn to_net(&self) -> Result<GroupedNet> {
        if self.format != MODEL_FORMAT || self.version != MODEL_VERSION {
            return Err(Error::Schema(format!(
                "unsupported model document {} v{}",
                self.format, self.version
            )));
        }
        let mut net = GroupedNet::zeroed(self.layer_dims.clone(), self.head, self.groups.clone())?;
        let shapes_ok = net.weights.len() == self.weights.len()
            && net.weights.iter().zip(&self.weights).all(|(a, b)| a.len() == b.len())
            && net.biases.len() == self.biases.len()
            && net.biases.iter().zip(&self.biases).all(|(a, b)| a.len() == b.len());
        if !shapes_ok {
            return Err(Error::Schema("weight arrays do not match layer dims".into()));
        }
        net.weights = self.weights.clone();
        net.biases = self.biases.clone();
        net.activation = self.activation;
        net.seed = self.seed;
        if !net.all_finite() {
            return Err(Error::Schema("model parameters are not finite".into()));
        }
        Ok(net)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

pub(crate) fn f64_to_hex(v: f64) -> String {
    format!("{:016x}", v.to_bits())
}

pub(crate) fn hex_to_f64(s: &str) -> std::result::Result<f64, String> {
    u64::from_str_radix(s, 16)
        .map(f64::from_bits)
        .map_err(|e| format!("bad float encoding {s:?}: {e}"))
}

pub(crate) mod hex_matrix {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(rows: &[Vec<f64>], ser: S) -> Result<S::Ok, S::Error> {
        let encoded: Vec<Vec<String>> = rows
            .iter()
            .map(|r| r.iter().map(|v| super::f64_to_hex(*v)).collect())
            .collect();
        serde::Serialize::serialize(&encoded, ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Vec<Vec<f64>>, D::Error> {
        let encoded: Vec<Vec<String>> = Vec::deserialize(de)?;
        encoded
            .iter()
            .map(|r| r.iter().map(|s| super::hex_to_f64(s).map_err(D::Error::custom)).collect())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn document_roundtrip_is_bit_exact(seed in any::<u64>(), hidden in 1usize..6) {
            let net = GroupedNet::new(vec![3, hidden, 2], Head::Softmax { classes: 2 }, vec![vec![0, 2], vec![1]], seed).unwrap();
            let json = ModelDocument::from_net(&net, Some(&TrainConfig::default())).to_json().unwrap();
            let back = ModelDocument::from_json(&json).unwrap().to_net().unwrap();
            prop_assert_eq!(back.params_flat().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                            net.params_flat().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
            prop_assert_eq!(back, net);
        }
    }

    #[test]
    fn rejects_unknown_version_and_bad_shapes() {
        let net = GroupedNet::with_singleton_groups(vec![2, 2, 1], Head::Sigmoid, 1).unwrap();
        let mut doc = ModelDocument::from_net(&net, None);
        doc.version = 99;
        assert!(doc.to_net().is_err());
        let mut doc = ModelDocument::from_net(&net, None);
        doc.weights[0].pop();
        assert!(doc.to_net().is_err());
    }

    #[test]
    fn special_values_roundtrip() {
        for v in [0.0, -0.0, 1e-310, f64::MAX, std::f64::consts::PI] {
            assert_eq!(hex_to_f64(&f64_to_hex(v)).unwrap().to_bits(), v.to_bits());
        }
    }
}
