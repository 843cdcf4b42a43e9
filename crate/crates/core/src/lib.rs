//! Causal feature distillation for imbalanced binary risk prediction.
//!
//! The pipeline screens covariates with a group-Lasso outcome network, fits
//! one adaptive group-Lasso propensity model per feature, estimates each
//! feature's causal response curve and rewrites the data into causal feature
//! attributions before training a risk classifier on them.

pub mod attribution;
pub mod data;
pub mod encode;
pub mod eval;
pub mod error;
pub mod mdn;
pub mod nn;
pub mod outcome;
pub mod pipeline;
pub mod propensity;
pub mod risk;
pub mod synth;

pub use error::{Error, Result};
