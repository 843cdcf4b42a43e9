//! Feedforward networks whose first layer is partitioned into per-feature groups.
//!
//! Every model in the crate (outcome screen, propensity models, response
//! models and the final risk classifier) is a [`GroupedNet`]. Hidden layers
//! use `tanh`; the output head decides how the final affine layer is read:
//! an identity map, a sigmoid probability, a softmax simplex or the
//! parameters of a Gaussian mixture.
//!
//! Weights are stored row-major with shape `(d_k, d_{k-1})`, so the column
//! `j` of the first weight matrix is exactly the parameter group attached to
//! input `j`.

mod serial;
mod train;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdn::{self, MixtureDensityParams};

pub use serial::ModelDocument;
pub use train::{group_lasso_prox, train, TrainConfig, TrainReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Head {
    Linear,
    Sigmoid,
    Softmax { classes: usize },
    MixtureDensity { components: usize },
}

impl Head {
    /// Width of the final affine layer required by the head, if fixed.
    fn required_width(&self) -> Option<usize> {
        match *self {
            Head::Linear => None,
            Head::Sigmoid => Some(1),
            Head::Softmax { classes } => Some(classes),
            Head::MixtureDensity { components } => Some(3 * components),
        }
    }

    pub fn default_loss(&self) -> LossKind {
        match self {
            Head::Linear => LossKind::SquaredError,
            Head::Sigmoid | Head::Softmax { .. } => LossKind::CrossEntropy,
            Head::MixtureDensity { .. } => LossKind::NegLogLikelihood,
        }
    }

    /// Number of target values per sample expected by the head's loss.
    pub fn target_width(&self, output_width: usize) -> usize {
        match self {
            Head::Linear => output_width,
            _ => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Half the squared Euclidean error.
    SquaredError,
    /// Log-loss; the target is a label in `[0, 1]` (sigmoid) or a class index (softmax).
    CrossEntropy,
    /// Mixture negative log-likelihood of a scalar target.
    NegLogLikelihood,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
}

#[derive(Clone, Debug, PartialEq)]
pub enum HeadOutput {
    Linear(Vec<f64>),
    Probability(f64),
    Simplex(Vec<f64>),
    Mixture(MixtureDensityParams),
}

#[derive(Clone, Debug)]
pub struct ForwardPass {
    /// `H_0 = x` followed by every hidden activation `H_1 .. H_{L-1}`.
    pub activations: Vec<Vec<f64>>,
    /// Pre-head affine output of the final layer.
    pub logits: Vec<f64>,
    pub output: HeadOutput,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroupedNet {
    layer_dims: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    activation: Activation,
    head: Head,
    groups: Vec<Vec<usize>>,
    seed: u64,
}

impl GroupedNet {
    /// Builds a network with Glorot-uniform weights and zero intercepts.
    ///
    /// `layer_dims` is `(d_0, d_1, ..., d_L)`; `groups` must partition `0..d_0`.
    pub fn new(layer_dims: Vec<usize>, head: Head, groups: Vec<Vec<usize>>, seed: u64) -> Result<Self> {
        let mut net = Self::zeroed(layer_dims, head, groups)?;
        net.seed = seed;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for k in 0..net.weights.len() {
            let (d_in, d_out) = (net.layer_dims[k], net.layer_dims[k + 1]);
            let limit = (6.0 / (d_in + d_out) as f64).sqrt();
            for w in &mut net.weights[k] {
                *w = rng.random_range(-limit..limit);
            }
        }
        Ok(net)
    }

    /// Same as [`GroupedNet::new`] with one group per input column.
    pub fn with_singleton_groups(layer_dims: Vec<usize>, head: Head, seed: u64) -> Result<Self> {
        let groups = (0..layer_dims.first().copied().unwrap_or(0)).map(|c| vec![c]).collect();
        Self::new(layer_dims, head, groups, seed)
    }

    /// A network with every parameter set to zero.
    pub fn zeroed(layer_dims: Vec<usize>, head: Head, groups: Vec<Vec<usize>>) -> Result<Self> {
        validate_layout(&layer_dims, head, &groups)?;
        let weights = layer_dims
            .windows(2)
            .map(|w| vec![0.0; w[0] * w[1]])
            .collect();
        let biases = layer_dims[1..].iter().map(|&d| vec![0.0; d]).collect();
        Ok(Self {
            layer_dims,
            weights,
            biases,
            activation: Activation::Tanh,
            head,
            groups,
            seed: 0,
        })
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().expect("validated non-empty")
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Width of the last hidden layer, or the input width for a single-layer net.
    pub fn last_hidden_dim(&self) -> usize {
        self.layer_dims[self.layer_dims.len() - 2]
    }

    /// Row-major `(d_k, d_{k-1})` weights of layer `k` (0-based).
    pub fn weights(&self, layer: usize) -> &[f64] {
        &self.weights[layer]
    }

    pub fn weights_mut(&mut self, layer: usize) -> &mut [f64] {
        &mut self.weights[layer]
    }

    pub fn biases(&self, layer: usize) -> &[f64] {
        &self.biases[layer]
    }

    pub fn biases_mut(&mut self, layer: usize) -> &mut [f64] {
        &mut self.biases[layer]
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>() + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    /// Parameters flattened layer by layer: weights (row-major) then intercepts.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }

    pub fn set_params_flat(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                what: "parameter vector",
                expected: self.param_count(),
                found: params.len(),
            });
        }
        let mut offset = 0;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            let (wl, bl) = (w.len(), b.len());
            w.copy_from_slice(&params[offset..offset + wl]);
            offset += wl;
            b.copy_from_slice(&params[offset..offset + bl]);
            offset += bl;
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.weights.iter().chain(&self.biases).flatten().all(|v| v.is_finite())
    }

    /// Euclidean norm of each first-layer group `beta_j`.
    pub fn group_norms(&self) -> Vec<f64> {
        let cols = self.layer_dims[0];
        let rows = self.layer_dims[1];
        let w = &self.weights[0];
        self.groups
            .iter()
            .map(|group| {
                let mut sq = 0.0;
                for r in 0..rows {
                    for &c in group {
                        let v = w[r * cols + c];
                        sq += v * v;
                    }
                }
                sq.sqrt()
            })
            .collect()
    }

    pub(crate) fn sgd_step(&mut self, grad: &NetGradient, learning_rate: f64) {
        let params = self.weights.iter_mut().chain(self.biases.iter_mut());
        let grads = grad.weights.iter().chain(&grad.biases);
        for (p, g) in params.zip(grads) {
            for (pi, gi) in p.iter_mut().zip(g) {
                *pi -= learning_rate * gi;
            }
        }
    }

    /// Applies the group soft-threshold to each first-layer group.
    pub(crate) fn prox_first_layer(&mut self, thresholds: &[f64]) {
        let cols = self.layer_dims[0];
        let rows = self.layer_dims[1];
        let norms = self.group_norms();
        let w = &mut self.weights[0];
        for ((group, &norm), &t) in self.groups.iter().zip(&norms).zip(thresholds) {
            if t <= 0.0 {
                continue;
            }
            let scale = if norm <= t { 0.0 } else { 1.0 - t / norm };
            for r in 0..rows {
                for &c in group {
                    w[r * cols + c] *= scale;
                }
            }
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<ForwardPass> {
        self.check_input(x)?;
        let mut scratch = Scratch::new(self);
        self.forward_into(x, &mut scratch);
        let output = self.head_output(&scratch.logits);
        Ok(ForwardPass {
            activations: scratch.acts,
            logits: scratch.logits,
            output,
        })
    }

    /// Head output alone.
    pub fn predict(&self, x: &[f64]) -> Result<HeadOutput> {
        self.check_input(x)?;
        let mut scratch = Scratch::new(self);
        self.forward_into(x, &mut scratch);
        Ok(self.head_output(&scratch.logits))
    }

    /// Activation of the last hidden layer.
    pub fn last_hidden(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut scratch = Scratch::new(self);
        self.forward_into(x, &mut scratch);
        Ok(scratch.acts.pop().expect("at least the input activation"))
    }

    /// Sigmoid-head probabilities for row-major `inputs`.
    pub fn predict_probabilities(&self, inputs: &[f64]) -> Result<Vec<f64>> {
        if self.head != Head::Sigmoid {
            return Err(Error::InvalidInput("probabilities need a sigmoid head".into()));
        }
        self.check_batch(inputs)?;
        let mut scratch = Scratch::new(self);
        Ok(inputs
            .chunks(self.input_dim())
            .map(|x| {
                self.forward_into(x, &mut scratch);
                mdn::sigmoid(scratch.logits[0])
            })
            .collect())
    }

    /// Row-major last-hidden activations for row-major `inputs`.
    pub fn last_hidden_batch(&self, inputs: &[f64]) -> Result<Vec<f64>> {
        self.check_batch(inputs)?;
        let mut scratch = Scratch::new(self);
        let mut out = Vec::with_capacity(inputs.len() / self.input_dim() * self.last_hidden_dim());
        for x in inputs.chunks(self.input_dim()) {
            self.forward_into(x, &mut scratch);
            out.extend_from_slice(scratch.last_hidden());
        }
        Ok(out)
    }

    fn check_batch(&self, inputs: &[f64]) -> Result<()> {
        if self.input_dim() == 0 || inputs.len() % self.input_dim() != 0 {
            return Err(Error::DimensionMismatch {
                what: "network input batch",
                expected: self.input_dim(),
                found: inputs.len(),
            });
        }
        Ok(())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                what: "network input",
                expected: self.input_dim(),
                found: x.len(),
            });
        }
        Ok(())
    }

    fn head_output(&self, logits: &[f64]) -> HeadOutput {
        match self.head {
            Head::Linear => HeadOutput::Linear(logits.to_vec()),
            Head::Sigmoid => HeadOutput::Probability(mdn::sigmoid(logits[0])),
            Head::Softmax { .. } => HeadOutput::Simplex(mdn::softmax(logits)),
            Head::MixtureDensity { .. } => HeadOutput::Mixture(MixtureDensityParams::from_logits(logits)),
        }
    }

    pub(crate) fn forward_into(&self, x: &[f64], scratch: &mut Scratch) {
        scratch.acts[0].copy_from_slice(x);
        let last = self.weights.len() - 1;
        for k in 0..=last {
            let d_in = self.layer_dims[k];
            let w = &self.weights[k];
            let b = &self.biases[k];
            let (done, rest) = scratch.acts.split_at_mut(k + 1);
            let input = &done[k];
            let out: &mut [f64] = if k == last { &mut scratch.logits } else { &mut rest[0] };
            for (r, o) in out.iter_mut().enumerate() {
                let row = &w[r * d_in..(r + 1) * d_in];
                let mut z = b[r];
                for (wi, xi) in row.iter().zip(input) {
                    z += wi * xi;
                }
                *o = if k == last { z } else { z.tanh() };
            }
        }
    }

    /// Loss of a single sample, accumulating `weight * dLoss/dParams` into `grad`.
    pub(crate) fn accumulate_sample(
        &self,
        x: &[f64],
        target: &[f64],
        weight: f64,
        loss: LossKind,
        scratch: &mut Scratch,
        grad: &mut NetGradient,
    ) -> f64 {
        self.forward_into(x, scratch);
        let value = head_loss(self.head, loss, &scratch.logits, target, &mut scratch.deltas_out);
        let last = self.weights.len() - 1;
        scratch.delta.clear();
        scratch.delta.extend(scratch.deltas_out.iter().map(|d| d * weight));
        for k in (0..=last).rev() {
            let d_in = self.layer_dims[k];
            let input = &scratch.acts[k];
            let gw = &mut grad.weights[k];
            let gb = &mut grad.biases[k];
            for (r, &d) in scratch.delta.iter().enumerate() {
                gb[r] += d;
                if d != 0.0 {
                    let row = &mut gw[r * d_in..(r + 1) * d_in];
                    for (g, xi) in row.iter_mut().zip(input) {
                        *g += d * xi;
                    }
                }
            }
            if k > 0 {
                let w = &self.weights[k];
                scratch.next_delta.clear();
                scratch.next_delta.resize(d_in, 0.0);
                for (r, &d) in scratch.delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    let row = &w[r * d_in..(r + 1) * d_in];
                    for (nd, wi) in scratch.next_delta.iter_mut().zip(row) {
                        *nd += d * wi;
                    }
                }
                for (nd, a) in scratch.next_delta.iter_mut().zip(input) {
                    *nd *= 1.0 - a * a;
                }
                std::mem::swap(&mut scratch.delta, &mut scratch.next_delta);
            }
        }
        value
    }

    /// Weighted-mean loss over `samples` and its full parameter gradient.
    pub fn loss_and_grad(&self, samples: &Samples, loss: LossKind) -> Result<(f64, NetGradient)> {
        self.check_samples(samples, loss)?;
        let indices: Vec<usize> = (0..samples.len()).collect();
        let mut grad = NetGradient::zeros_like(self);
        let mut scratch = Scratch::new(self);
        let value = self.batch_loss_and_grad(samples, &indices, loss, &mut scratch, &mut grad);
        Ok((value, grad))
    }

    /// Weighted-mean loss over `samples` without gradients.
    pub fn mean_loss(&self, samples: &Samples, loss: LossKind) -> Result<f64> {
        self.check_samples(samples, loss)?;
        let mut scratch = Scratch::new(self);
        let mut total = 0.0;
        let mut weight_sum = 0.0;
        for i in 0..samples.len() {
            self.forward_into(samples.input(i), &mut scratch);
            let w = samples.weight(i);
            total += w * head_loss(self.head, loss, &scratch.logits, samples.target(i), &mut scratch.deltas_out);
            weight_sum += w;
        }
        Ok(total / weight_sum)
    }

    pub(crate) fn batch_loss_and_grad(
        &self,
        samples: &Samples,
        indices: &[usize],
        loss: LossKind,
        scratch: &mut Scratch,
        grad: &mut NetGradient,
    ) -> f64 {
        grad.fill_zero();
        let mut total = 0.0;
        let mut weight_sum = 0.0;
        for &i in indices {
            let w = samples.weight(i);
            total += w * self.accumulate_sample(samples.input(i), samples.target(i), w, loss, scratch, grad);
            weight_sum += w;
        }
        grad.scale(1.0 / weight_sum);
        total / weight_sum
    }

    pub(crate) fn check_samples(&self, samples: &Samples, loss: LossKind) -> Result<()> {
        if samples.is_empty() {
            return Err(Error::EmptyBatch);
        }
        if samples.input_dim() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                what: "sample inputs",
                expected: self.input_dim(),
                found: samples.input_dim(),
            });
        }
        let compatible = matches!(
            (self.head, loss),
            (Head::Linear, LossKind::SquaredError)
                | (Head::Sigmoid, LossKind::CrossEntropy)
                | (Head::Softmax { .. }, LossKind::CrossEntropy)
                | (Head::MixtureDensity { .. }, LossKind::NegLogLikelihood)
        );
        if !compatible {
            return Err(Error::InvalidInput(format!(
                "loss {loss:?} does not match head {:?}",
                self.head
            )));
        }
        let width = self.head.target_width(self.output_dim());
        if samples.target_dim() != width {
            return Err(Error::DimensionMismatch {
                what: "sample targets",
                expected: width,
                found: samples.target_dim(),
            });
        }
        if let Head::Softmax { classes } = self.head {
            if let Some(bad) = samples.targets.iter().find(|t| t.fract() != 0.0 || **t < 0.0 || **t >= classes as f64) {
                return Err(Error::InvalidInput(format!("class index {bad} outside 0..{classes}")));
            }
        }
        Ok(())
    }
}

fn validate_layout(layer_dims: &[usize], head: Head, groups: &[Vec<usize>]) -> Result<()> {
    if layer_dims.len() < 2 || layer_dims.iter().any(|&d| d == 0) {
        return Err(Error::InvalidInput(format!(
            "layer dims must hold at least two positive widths, got {layer_dims:?}"
        )));
    }
    if let Some(width) = head.required_width() {
        let out = *layer_dims.last().unwrap();
        if out != width {
            return Err(Error::DimensionMismatch {
                what: "head output width",
                expected: width,
                found: out,
            });
        }
    }
    if matches!(head, Head::Softmax { classes } if classes < 2) {
        return Err(Error::InvalidInput("softmax head needs at least two classes".into()));
    }
    let mut seen = vec![false; layer_dims[0]];
    for &c in groups.iter().flatten() {
        if c >= seen.len() || seen[c] {
            return Err(Error::InvalidInput(format!(
                "first-layer groups must partition the {} input columns",
                layer_dims[0]
            )));
        }
        seen[c] = true;
    }
    if seen.iter().any(|s| !s) || groups.iter().any(Vec::is_empty) {
        return Err(Error::InvalidInput(format!(
            "first-layer groups must partition the {} input columns",
            layer_dims[0]
        )));
    }
    Ok(())
}

fn head_loss(head: Head, loss: LossKind, logits: &[f64], target: &[f64], d_logits: &mut [f64]) -> f64 {
    match (head, loss) {
        (Head::Sigmoid, _) => {
            let z = logits[0];
            let y = target[0];
            d_logits[0] = mdn::sigmoid(z) - y;
            mdn::softplus(z) - y * z
        }
        (Head::Softmax { .. }, _) => {
            let class = target[0] as usize;
            let lse = mdn::log_sum_exp(logits);
            for (k, (d, z)) in d_logits.iter_mut().zip(logits).enumerate() {
                *d = (z - lse).exp() - if k == class { 1.0 } else { 0.0 };
            }
            lse - logits[class]
        }
        (Head::MixtureDensity { .. }, _) => mdn::nll_and_grad(logits, target[0], d_logits),
        (Head::Linear, _) => {
            let mut sq = 0.0;
            for ((d, z), y) in d_logits.iter_mut().zip(logits).zip(target) {
                let e = z - y;
                *d = e;
                sq += e * e;
            }
            0.5 * sq
        }
    }
}

/// Gradient with the same layout as the network parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct NetGradient {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl NetGradient {
    pub fn zeros_like(net: &GroupedNet) -> Self {
        Self {
            weights: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    /// Same ordering as [`GroupedNet::params_flat`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }

    fn fill_zero(&mut self) {
        for v in self.weights.iter_mut().chain(self.biases.iter_mut()) {
            v.iter_mut().for_each(|g| *g = 0.0);
        }
    }

    fn scale(&mut self, factor: f64) {
        for v in self.weights.iter_mut().chain(self.biases.iter_mut()) {
            v.iter_mut().for_each(|g| *g *= factor);
        }
    }
}

/// Reusable per-thread buffers for forward and backward passes.
pub(crate) struct Scratch {
    acts: Vec<Vec<f64>>,
    logits: Vec<f64>,
    deltas_out: Vec<f64>,
    delta: Vec<f64>,
    next_delta: Vec<f64>,
}

impl Scratch {
    pub(crate) fn new(net: &GroupedNet) -> Self {
        let dims = &net.layer_dims;
        Self {
            acts: dims[..dims.len() - 1].iter().map(|&d| vec![0.0; d]).collect(),
            logits: vec![0.0; net.output_dim()],
            deltas_out: vec![0.0; net.output_dim()],
            delta: Vec::new(),
            next_delta: Vec::new(),
        }
    }

    pub(crate) fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub(crate) fn last_hidden(&self) -> &[f64] {
        self.acts.last().expect("input activation present")
    }
}

/// Row-major training samples with optional per-sample weights.
#[derive(Clone, Debug)]
pub struct Samples {
    inputs: Vec<f64>,
    targets: Vec<f64>,
    weights: Option<Vec<f64>>,
    input_dim: usize,
    target_dim: usize,
}

impl Samples {
    pub fn new(inputs: Vec<f64>, input_dim: usize, targets: Vec<f64>, target_dim: usize) -> Result<Self> {
        if input_dim == 0 || target_dim == 0 || inputs.len() % input_dim != 0 || targets.len() % target_dim != 0 {
            return Err(Error::InvalidInput("sample buffers do not divide into rows".into()));
        }
        if inputs.len() / input_dim != targets.len() / target_dim {
            return Err(Error::DimensionMismatch {
                what: "sample rows",
                expected: inputs.len() / input_dim,
                found: targets.len() / target_dim,
            });
        }
        if inputs.iter().chain(&targets).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("samples contain non-finite values".into()));
        }
        Ok(Self {
            inputs,
            targets,
            weights: None,
            input_dim,
            target_dim,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<Self> {
        let input_dim = rows.first().map_or(0, Vec::len);
        let target_dim = targets.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != input_dim) || targets.iter().any(|t| t.len() != target_dim) {
            return Err(Error::InvalidInput("ragged sample rows".into()));
        }
        Self::new(rows.concat(), input_dim, targets.concat(), target_dim)
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.len() {
            return Err(Error::DimensionMismatch {
                what: "sample weights",
                expected: self.len(),
                found: weights.len(),
            });
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) || weights.iter().all(|w| *w == 0.0) {
            return Err(Error::InvalidInput("sample weights must be finite, non-negative, not all zero".into()));
        }
        self.weights = Some(weights);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.inputs.len() / self.input_dim
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn target_dim(&self) -> usize {
        self.target_dim
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.input_dim..(i + 1) * self.input_dim]
    }

    pub fn target(&self, i: usize) -> &[f64] {
        &self.targets[i * self.target_dim..(i + 1) * self.target_dim]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w[i])
    }
}
