//! Fixed generators with known causal structure.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{assign_random_equations, generate_risk_dataset, random_dag, sample_bayes_net, BayesNet, Equation, Node};
use crate::data::{Dataset, FeatureSpec, Schema};
use crate::error::{Error, Result};

fn gaussian_root(name: &str) -> Node {
    Node {
        name: name.into(),
        parents: vec![],
        equation: Some(Equation::Gaussian { mean: 0.0, sd: 1.0 }),
        hidden: false,
    }
}

/// A random 20-feature Bayesian network with a logistic risk node.
pub fn fig3_spec(seed: u64) -> BayesNet {
    let mut net = random_dag(20, 0.15, seed).expect("valid DAG parameters");
    assign_random_equations(&mut net, seed ^ 0x5eed, 0.3);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7157);
    let mut parents: Vec<usize> = (0..20).filter(|_| rng.random_bool(0.3)).collect();
    if parents.is_empty() {
        parents.push(rng.random_range(0..20));
    }
    let k = parents.len();
    let linear = (0..k).map(|_| rng.random_range(-1.5..1.5)).collect();
    let tanh = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
    net.nodes.push(Node {
        name: "risk".into(),
        parents,
        equation: Some(Equation::Logistic {
            intercept: 0.0,
            linear,
            tanh,
            quadratic: Vec::new(),
        }),
        hidden: false,
    });
    net.risk = Some(20);
    net
}

/// Structural equations of the four-feature ablation pair.
///
/// `X0` is the only cause of the risk. Without the latent variable, `X1..X3`
/// are noisy children of `X0`; with it, they are driven mainly by the hidden
/// `H1` and only weakly by `X0`.
pub fn hidden_variable_spec(with_hidden: bool) -> BayesNet {
    let mut nodes = vec![gaussian_root("X0")];
    let risk_eq = Equation::Logistic {
        intercept: 0.0,
        linear: vec![2.0],
        tanh: vec![],
        quadratic: vec![0.5],
    };
    if with_hidden {
        for k in 1..=3 {
            nodes.push(Node {
                name: format!("X{k}"),
                parents: vec![0, 5],
                equation: Some(Equation::Continuous {
                    intercept: 0.0,
                    linear: vec![0.5, 1.0],
                    tanh: vec![],
                    quadratic: vec![],
                    noise_sd: 0.5,
                }),
                hidden: false,
            });
        }
        nodes.push(Node {
            name: "risk".into(),
            parents: vec![0],
            equation: Some(risk_eq),
            hidden: false,
        });
        nodes.push(Node {
            hidden: true,
            ..gaussian_root("H1")
        });
    } else {
        for k in 1..=3 {
            nodes.push(Node {
                name: format!("X{k}"),
                parents: vec![0],
                equation: Some(Equation::Continuous {
                    intercept: 0.0,
                    linear: vec![1.0],
                    tanh: vec![],
                    quadratic: vec![],
                    noise_sd: 0.5,
                }),
                hidden: false,
            });
        }
        nodes.push(Node {
            name: "risk".into(),
            parents: vec![0],
            equation: Some(risk_eq),
            hidden: false,
        });
    }
    BayesNet { nodes, risk: Some(4) }
}

#[derive(Clone, Debug)]
pub struct HiddenVariablePair {
    /// No latent variable.
    pub without_hidden: Dataset,
    /// `X1..X3` driven by the unexported `H1`.
    pub with_hidden: Dataset,
    pub spec_without_hidden: BayesNet,
    pub spec_with_hidden: BayesNet,
    pub cause: String,
    pub spurious: Vec<String>,
}

/// Both ablation datasets at 1000 positives / 9000 negatives.
pub fn hidden_variable_pair(seed: u64) -> Result<HiddenVariablePair> {
    hidden_variable_pair_sized(1000, 9000, seed)
}

pub fn hidden_variable_pair_sized(n_pos: usize, n_neg: usize, seed: u64) -> Result<HiddenVariablePair> {
    let spec_a = hidden_variable_spec(false);
    let spec_b = hidden_variable_spec(true);
    Ok(HiddenVariablePair {
        without_hidden: generate_risk_dataset(&spec_a, n_pos, n_neg, seed)?,
        with_hidden: generate_risk_dataset(&spec_b, n_pos, n_neg, seed)?,
        spec_without_hidden: spec_a,
        spec_with_hidden: spec_b,
        cause: "X0".into(),
        spurious: vec!["X1".into(), "X2".into(), "X3".into()],
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Confounder,
    Adjustment,
    Instrumental,
    Spurious,
}

impl Role {
    /// Roles that predict the outcome.
    pub fn is_outcome_predictive(self) -> bool {
        matches!(self, Role::Confounder | Role::Adjustment)
    }
}

/// Ground-truth roles of every covariate relative to one intervention feature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoleLabeledSpec {
    pub intervention: String,
    pub roles: Vec<(String, Role)>,
}

impl RoleLabeledSpec {
    /// Derives roles from directed paths: reaching the intervention and/or
    /// reaching the outcome without passing through the intervention.
    pub fn from_graph(net: &BayesNet, intervention: usize, outcome: usize) -> Self {
        let mut blocked = net.clone();
        for node in &mut blocked.nodes {
            node.parents.retain(|&p| p != intervention);
        }
        let roles = (0..net.nodes.len())
            .filter(|&v| v != intervention && v != outcome && !net.nodes[v].hidden)
            .map(|v| {
                let to_t = net.has_directed_path(v, intervention);
                let to_y = blocked.has_directed_path(v, outcome);
                let role = match (to_t, to_y) {
                    (true, true) => Role::Confounder,
                    (false, true) => Role::Adjustment,
                    (true, false) => Role::Instrumental,
                    (false, false) => Role::Spurious,
                };
                (net.nodes[v].name.clone(), role)
            })
            .collect();
        Self {
            intervention: net.nodes[intervention].name.clone(),
            roles,
        }
    }

    pub fn role_of(&self, name: &str) -> Option<Role> {
        self.roles.iter().find(|(n, _)| n == name).map(|(_, r)| *r)
    }
}

#[derive(Clone, Debug)]
pub struct RoleLabeledBenchmark {
    pub data: Dataset,
    pub net: BayesNet,
    pub spec: RoleLabeledSpec,
    /// Feature index of the intervention inside `data`.
    pub intervention: usize,
}

/// Binary intervention `T` with two covariates of each role.
pub fn role_labeled_benchmark(n: usize, seed: u64) -> Result<RoleLabeledBenchmark> {
    let names = ["C1", "C2", "P1", "P2", "I1", "I2", "S1", "S2"];
    let mut nodes: Vec<Node> = names.iter().map(|n| gaussian_root(n)).collect();
    // T <- C1, C2, I1, I2
    nodes.push(Node {
        name: "T".into(),
        parents: vec![0, 1, 4, 5],
        equation: Some(Equation::Logistic {
            intercept: 0.0,
            linear: vec![1.0, 1.0, 1.0, 1.0],
            tanh: vec![],
            quadratic: vec![],
        }),
        hidden: false,
    });
    // Y <- T, C1, C2, P1, P2
    nodes.push(Node {
        name: "risk".into(),
        parents: vec![8, 0, 1, 2, 3],
        equation: Some(Equation::Logistic {
            intercept: -1.0,
            linear: vec![1.5, 1.0, 1.0, 1.0, 1.0],
            tanh: vec![],
            quadratic: vec![],
        }),
        hidden: false,
    });
    let net = BayesNet { nodes, risk: Some(9) };
    let samples = sample_bayes_net(&net, n, seed)?;
    let order: Vec<usize> = std::iter::once(8).chain(0..8).collect();
    let features = order
        .iter()
        .map(|&i| {
            if i == 8 {
                FeatureSpec::binary("T")
            } else {
                let col = &samples.columns[i];
                let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                FeatureSpec::continuous(names[i], lo, hi)
            }
        })
        .collect();
    let values: Vec<f64> = (0..n)
        .flat_map(|r| order.iter().map(move |&i| (i, r)))
        .map(|(i, r)| samples.columns[i][r])
        .collect();
    let labels = samples.columns[9].iter().map(|&y| y as u8).collect();
    let data = Dataset::new(Schema::new(features)?, values, labels)?;
    let spec = RoleLabeledSpec::from_graph(&net, 8, 9);
    Ok(RoleLabeledBenchmark {
        data,
        net,
        spec,
        intervention: 0,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DoseResponseKind {
    Randomized,
    ConfoundedLinear,
    ConfoundedNonlinear,
}

impl std::str::FromStr for DoseResponseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "randomized" => Ok(Self::Randomized),
            "confounded-linear" => Ok(Self::ConfoundedLinear),
            "confounded-nonlinear" => Ok(Self::ConfoundedNonlinear),
            other => Err(Error::InvalidInput(format!("unknown dose-response kind {other}"))),
        }
    }
}

/// Continuous intervention `X` (feature 0) with a binary confounder `C` (feature 1).
///
/// `C ~ Bernoulli(0.5)` and, for the confounded kinds, `X = (C - 1/2) + N(0, 1)`;
/// the randomized kind draws `X ~ N(0, 1)` independently. The risk is
/// `Bernoulli(m(X) + 0.4 (C - 1/2))` with `m(x) = 0.5 + 0.3 tanh(x)` (linear,
/// randomized) or `m(x) = 0.3 + 0.3 exp(-x^2/2)` (nonlinear). Because `C` is
/// centred, `mu(x) = m(x)`. Given `X = x` the log-odds of `C = 1` are `x`, so
/// the naive conditional mean overshoots by `0.4 E[C - 1/2 | x] = 0.2 tanh(x/2)`.
#[derive(Clone, Debug)]
pub struct DoseResponseBenchmark {
    pub kind: DoseResponseKind,
    pub data: Dataset,
    pub intervention: usize,
}

impl DoseResponseBenchmark {
    pub fn mu_true(&self, x: f64) -> f64 {
        dose_mean(self.kind, x)
    }

    /// `E[Y | X = x] - mu(x)` for the generator.
    pub fn naive_bias(&self, x: f64) -> f64 {
        match self.kind {
            DoseResponseKind::Randomized => 0.0,
            _ => 0.2 * (0.5 * x).tanh(),
        }
    }

    pub fn naive_mean(&self, x: f64) -> f64 {
        self.mu_true(x) + self.naive_bias(x)
    }
}

fn dose_mean(kind: DoseResponseKind, x: f64) -> f64 {
    match kind {
        DoseResponseKind::Randomized | DoseResponseKind::ConfoundedLinear => 0.5 + 0.3 * x.tanh(),
        DoseResponseKind::ConfoundedNonlinear => 0.3 + 0.3 * (-0.5 * x * x).exp(),
    }
}

pub fn dose_response_benchmark(kind: DoseResponseKind, n: usize, seed: u64) -> Result<DoseResponseBenchmark> {
    if n < 2 {
        return Err(Error::InvalidInput("dose-response benchmark needs at least two rows".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut values = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let c = f64::from(u8::from(rng.random_bool(0.5)));
        let noise = normal.sample(&mut rng);
        let x = match kind {
            DoseResponseKind::Randomized => noise,
            _ => (c - 0.5) + noise,
        };
        let p = dose_mean(kind, x) + 0.4 * (c - 0.5);
        labels.push(u8::from(rng.random::<f64>() < p));
        values.push(x);
        values.push(c);
    }
    let xs = values.iter().step_by(2);
    let lo = xs.clone().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.copied().fold(f64::NEG_INFINITY, f64::max);
    let schema = Schema::new(vec![FeatureSpec::continuous("X", lo, hi), FeatureSpec::binary("C")])?;
    Ok(DoseResponseBenchmark {
        kind,
        data: Dataset::new(schema, values, labels)?,
        intervention: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::pearson;

    #[test]
    fn hidden_pair_shapes() {
        let pair = hidden_variable_pair_sized(100, 900, 1).unwrap();
        for data in [&pair.without_hidden, &pair.with_hidden] {
            assert_eq!(data.schema().names(), vec!["X0", "X1", "X2", "X3"]);
            assert_eq!(data.positives(), 100);
            assert_eq!(data.n_rows(), 1000);
        }
    }

    #[test]
    fn cause_correlates_with_children_without_hidden() {
        let pair = hidden_variable_pair_sized(500, 4500, 3).unwrap();
        let d = &pair.without_hidden;
        assert!(pearson(&d.column(0), &d.column(1)) >= 0.2);
    }

    #[test]
    fn role_labels_follow_the_graph() {
        let bench = role_labeled_benchmark(200, 1).unwrap();
        let expect = [
            ("C1", Role::Confounder),
            ("C2", Role::Confounder),
            ("P1", Role::Adjustment),
            ("P2", Role::Adjustment),
            ("I1", Role::Instrumental),
            ("I2", Role::Instrumental),
            ("S1", Role::Spurious),
            ("S2", Role::Spurious),
        ];
        for (name, role) in expect {
            assert_eq!(bench.spec.role_of(name), Some(role), "{name}");
        }
        assert_eq!(bench.data.schema().names()[bench.intervention], "T");
    }

    #[test]
    fn randomized_truth_is_conditional_mean() {
        let b = dose_response_benchmark(DoseResponseKind::Randomized, 10, 1).unwrap();
        for x in [-2.0, 0.0, 1.3] {
            assert_eq!(b.naive_mean(x), b.mu_true(x));
        }
    }

    #[test]
    fn confounded_bias_matches_simulation() {
        let b = dose_response_benchmark(DoseResponseKind::ConfoundedLinear, 200_000, 5).unwrap();
        // stratified mean of Y in a narrow band around x = 1
        let (mut sum, mut count) = (0.0, 0.0);
        for (row, &y) in b.data.rows().zip(b.data.labels()) {
            if (row[0] - 1.0).abs() < 0.05 {
                sum += f64::from(y);
                count += 1.0;
            }
        }
        let empirical = sum / count;
        assert!((empirical - b.naive_mean(1.0)).abs() < 0.03, "{empirical} vs {}", b.naive_mean(1.0));
        assert!(b.naive_bias(1.0) > 0.05);
    }
}
