//! Ground-truth-known data: Bayesian networks sampled ancestrally, plus the
//! fixed benchmarks in [`benchmarks`].

pub mod benchmarks;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureSpec, Schema};
use crate::error::{Error, Result};
use crate::mdn::sigmoid;

pub use benchmarks::{
    dose_response_benchmark, fig3_spec, hidden_variable_pair, hidden_variable_pair_sized, hidden_variable_spec, role_labeled_benchmark,
    DoseResponseBenchmark, DoseResponseKind, HiddenVariablePair, Role, RoleLabeledBenchmark, RoleLabeledSpec,
};

/// Structural equation of one node; coefficient vectors align with the node's parents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Equation {
    Bernoulli { p: f64 },
    Gaussian { mean: f64, sd: f64 },
    Categorical { probs: Vec<f64> },
    /// `intercept + sum(linear*p) + sum(tanh*tanh(p)) + sum(quadratic*p^2) + N(0, noise_sd^2)`.
    Continuous {
        intercept: f64,
        linear: Vec<f64>,
        #[serde(default)]
        tanh: Vec<f64>,
        #[serde(default)]
        quadratic: Vec<f64>,
        noise_sd: f64,
    },
    /// Bernoulli with log-odds built like [`Equation::Continuous`] (no additive noise).
    Logistic {
        intercept: f64,
        linear: Vec<f64>,
        #[serde(default)]
        tanh: Vec<f64>,
        #[serde(default)]
        quadratic: Vec<f64>,
    },
    /// Exact copy of the single parent.
    Copy,
}

impl Equation {
    fn is_root_law(&self) -> bool {
        matches!(
            self,
            Equation::Bernoulli { .. } | Equation::Gaussian { .. } | Equation::Categorical { .. }
        )
    }

    fn validate(&self, name: &str, n_parents: usize) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidInput(format!("node {name}: {msg}")));
        match self {
            Equation::Bernoulli { p } if !(0.0..=1.0).contains(p) => bad("probability outside [0, 1]"),
            Equation::Gaussian { sd, .. } if !(*sd >= 0.0) => bad("negative sd"),
            Equation::Categorical { probs }
                if probs.len() < 2 || probs.iter().any(|p| !(*p >= 0.0)) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-9 =>
            {
                bad("categorical probabilities must form a simplex over >= 2 levels")
            }
            Equation::Continuous { noise_sd, .. } if !(*noise_sd >= 0.0) => bad("negative noise sd"),
            Equation::Continuous { linear, tanh, quadratic, .. } | Equation::Logistic { linear, tanh, quadratic, .. }
                if linear.len() != n_parents
                    || !(tanh.is_empty() || tanh.len() == n_parents)
                    || !(quadratic.is_empty() || quadratic.len() == n_parents) =>
            {
                bad("coefficient vectors must match the parent count")
            }
            Equation::Copy if n_parents != 1 => bad("copy needs exactly one parent"),
            e if e.is_root_law() && n_parents != 0 => bad("root distribution on a node with parents"),
            _ => Ok(()),
        }
    }

    fn score(intercept: f64, linear: &[f64], tanh: &[f64], quadratic: &[f64], parents: &[f64]) -> f64 {
        let mut s = intercept;
        for (k, &p) in parents.iter().enumerate() {
            s += linear[k] * p;
            if let Some(t) = tanh.get(k) {
                s += t * p.tanh();
            }
            if let Some(q) = quadratic.get(k) {
                s += q * p * p;
            }
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Node {
    pub name: String,
    #[serde(default)]
    pub parents: Vec<usize>,
    pub equation: Option<Equation>,
    /// Latent nodes are sampled but never exported.
    #[serde(default)]
    pub hidden: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BayesNet {
    pub nodes: Vec<Node>,
    /// Index of the binary risk node, whose equation must be [`Equation::Logistic`].
    pub risk: Option<usize>,
}

impl BayesNet {
    pub fn from_json(text: &str) -> Result<Self> {
        let net: Self = serde_json::from_str(text)?;
        net.topological_order()?;
        Ok(net)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut edges: Vec<(usize, usize)> = self
            .nodes
            .iter()
            .enumerate()
            .flat_map(|(child, n)| n.parents.iter().map(move |&p| (p, child)))
            .collect();
        edges.sort_unstable();
        edges
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.name == name)
    }

    /// Kahn's algorithm; fails on a cycle or a dangling parent index.
    pub fn topological_order(&self) -> Result<Vec<usize>> {
        let n = self.nodes.len();
        let mut indegree = vec![0usize; n];
        let mut children = vec![Vec::new(); n];
        for (child, node) in self.nodes.iter().enumerate() {
            for &p in &node.parents {
                if p >= n || p == child {
                    return Err(Error::InvalidInput(format!("node {} has invalid parent {p}", node.name)));
                }
                indegree[child] += 1;
                children[p].push(child);
            }
        }
        let mut ready: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).rev().collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = ready.pop() {
            order.push(i);
            for &c in children[i].iter().rev() {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.push(c);
                }
            }
        }
        if order.len() != n {
            return Err(Error::InvalidInput("graph contains a cycle".into()));
        }
        Ok(order)
    }

    pub fn is_acyclic(&self) -> bool {
        self.topological_order().is_ok()
    }

    /// True if `from` reaches `to` along directed edges.
    pub fn has_directed_path(&self, from: usize, to: usize) -> bool {
        let mut stack = vec![from];
        let mut seen = vec![false; self.nodes.len()];
        while let Some(v) = stack.pop() {
            for (child, node) in self.nodes.iter().enumerate() {
                if node.parents.contains(&v) && !seen[child] {
                    if child == to {
                        return true;
                    }
                    seen[child] = true;
                    stack.push(child);
                }
            }
        }
        false
    }

    fn validate_equations(&self) -> Result<()> {
        for node in &self.nodes {
            let eq = node
                .equation
                .as_ref()
                .ok_or_else(|| Error::UnassignedEquation(node.name.clone()))?;
            eq.validate(&node.name, node.parents.len())?;
        }
        if let Some(r) = self.risk {
            match self.nodes.get(r).and_then(|n| n.equation.as_ref()) {
                Some(Equation::Logistic { .. }) => {}
                _ => return Err(Error::InvalidInput("risk node must use a logistic equation".into())),
            }
        }
        Ok(())
    }

    /// Observable schema of node `i`, given its sampled values.
    fn feature_spec(&self, i: usize, values: &[f64]) -> FeatureSpec {
        let node = &self.nodes[i];
        let mut cur = i;
        loop {
            match self.nodes[cur].equation.as_ref() {
                Some(Equation::Copy) => cur = self.nodes[cur].parents[0],
                Some(Equation::Bernoulli { .. }) | Some(Equation::Logistic { .. }) => {
                    return FeatureSpec::binary(node.name.clone())
                }
                Some(Equation::Categorical { probs }) => return FeatureSpec::categorical(node.name.clone(), probs.len()),
                _ => {
                    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    return FeatureSpec::continuous(node.name.clone(), lo, hi);
                }
            }
        }
    }
}

/// Random DAG over `n_nodes`: each pair ordered by a random permutation gets
/// an edge with probability `edge_prob`. Equations are left unassigned.
pub fn random_dag(n_nodes: usize, edge_prob: f64, seed: u64) -> Result<BayesNet> {
    if n_nodes == 0 {
        return Err(Error::InvalidInput("a DAG needs at least one node".into()));
    }
    if !(0.0..=1.0).contains(&edge_prob) {
        return Err(Error::InvalidInput("edge probability must lie in [0, 1]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..n_nodes).collect();
    perm.shuffle(&mut rng);
    let mut nodes: Vec<Node> = (0..n_nodes)
        .map(|i| Node {
            name: format!("X{i}"),
            parents: Vec::new(),
            equation: None,
            hidden: false,
        })
        .collect();
    for a in 0..n_nodes {
        for b in a + 1..n_nodes {
            if rng.random_bool(edge_prob) {
                nodes[perm[b]].parents.push(perm[a]);
            }
        }
    }
    for n in &mut nodes {
        n.parents.sort_unstable();
    }
    Ok(BayesNet { nodes, risk: None })
}

/// Column-per-node ancestral sample.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeSamples {
    pub names: Vec<String>,
    /// `columns[node][row]`.
    pub columns: Vec<Vec<f64>>,
}

impl NodeSamples {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names.iter().position(|n| n == name).map(|i| self.columns[i].as_slice())
    }
}

struct Sampler<'a> {
    net: &'a BayesNet,
    order: Vec<usize>,
    normal: Normal<f64>,
}

impl<'a> Sampler<'a> {
    fn new(net: &'a BayesNet) -> Result<Self> {
        let order = net.topological_order()?;
        net.validate_equations()?;
        Ok(Self {
            net,
            order,
            normal: Normal::new(0.0, 1.0).expect("unit normal"),
        })
    }

    /// One ancestral draw; the risk node's log-odds are shifted by `risk_offset`.
    fn draw(&self, rng: &mut ChaCha8Rng, risk_offset: f64, row: &mut [f64]) {
        let mut parents = Vec::new();
        for &i in &self.order {
            let node = &self.net.nodes[i];
            parents.clear();
            parents.extend(node.parents.iter().map(|&p| row[p]));
            let eq = node.equation.as_ref().expect("validated");
            row[i] = match eq {
                Equation::Bernoulli { p } => f64::from(u8::from(rng.random_bool(*p))),
                Equation::Gaussian { mean, sd } => mean + sd * self.normal.sample(rng),
                Equation::Categorical { probs } => {
                    let u: f64 = rng.random();
                    let mut acc = 0.0;
                    let mut level = probs.len() - 1;
                    for (k, p) in probs.iter().enumerate() {
                        acc += p;
                        if u < acc {
                            level = k;
                            break;
                        }
                    }
                    level as f64
                }
                Equation::Continuous {
                    intercept,
                    linear,
                    tanh,
                    quadratic,
                    noise_sd,
                } => Equation::score(*intercept, linear, tanh, quadratic, &parents) + noise_sd * self.normal.sample(rng),
                Equation::Logistic {
                    intercept,
                    linear,
                    tanh,
                    quadratic,
                } => {
                    let mut s = Equation::score(*intercept, linear, tanh, quadratic, &parents);
                    if Some(i) == self.net.risk {
                        s += risk_offset;
                    }
                    f64::from(u8::from(rng.random::<f64>() < sigmoid(s)))
                }
                Equation::Copy => parents[0],
            };
        }
    }

    /// Log-odds of the risk node for a drawn row.
    fn risk_score(&self, row: &[f64]) -> f64 {
        let r = self.net.risk.expect("risk node");
        let node = &self.net.nodes[r];
        let parents: Vec<f64> = node.parents.iter().map(|&p| row[p]).collect();
        match node.equation.as_ref() {
            Some(Equation::Logistic {
                intercept,
                linear,
                tanh,
                quadratic,
            }) => Equation::score(*intercept, linear, tanh, quadratic, &parents),
            _ => unreachable!("validated logistic risk node"),
        }
    }
}

/// `n` i.i.d. ancestral draws of every node, hidden ones included.
pub fn sample_bayes_net(net: &BayesNet, n: usize, seed: u64) -> Result<NodeSamples> {
    let sampler = Sampler::new(net)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut row = vec![0.0; net.nodes.len()];
    let mut columns = vec![Vec::with_capacity(n); net.nodes.len()];
    for _ in 0..n {
        sampler.draw(&mut rng, 0.0, &mut row);
        for (col, v) in columns.iter_mut().zip(&row) {
            col.push(*v);
        }
    }
    Ok(NodeSamples {
        names: net.nodes.iter().map(|n| n.name.clone()).collect(),
        columns,
    })
}

/// Draws rows until exactly `n_pos` positive and `n_neg` negative risk labels
/// have been accepted. The risk intercept is first shifted so the expected
/// prevalence matches the requested ratio; surplus draws of a filled class are
/// rejected.
pub fn generate_risk_dataset(net: &BayesNet, n_pos: usize, n_neg: usize, seed: u64) -> Result<Dataset> {
    let risk = net
        .risk
        .ok_or_else(|| Error::InvalidInput("network has no risk node".into()))?;
    if n_pos + n_neg == 0 {
        return Err(Error::InvalidInput("requested an empty dataset".into()));
    }
    let sampler = Sampler::new(net)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut row = vec![0.0; net.nodes.len()];

    let pilot: Vec<f64> = (0..4096)
        .map(|_| {
            sampler.draw(&mut rng, 0.0, &mut row);
            sampler.risk_score(&row)
        })
        .collect();
    let target = n_pos as f64 / (n_pos + n_neg) as f64;
    let offset = calibrate_offset(&pilot, target);

    let exported: Vec<usize> = (0..net.nodes.len())
        .filter(|&i| i != risk && !net.nodes[i].hidden)
        .collect();
    let max_draws = 200 * (n_pos + n_neg) + 10_000;
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n_pos + n_neg);
    let mut labels = Vec::with_capacity(n_pos + n_neg);
    let (mut pos, mut neg) = (0, 0);
    let mut draws = 0;
    while pos < n_pos || neg < n_neg {
        if draws >= max_draws {
            return Err(Error::GenerationFailed { attempts: draws });
        }
        draws += 1;
        sampler.draw(&mut rng, offset, &mut row);
        let y = row[risk] == 1.0;
        if (y && pos < n_pos) || (!y && neg < n_neg) {
            if y {
                pos += 1;
            } else {
                neg += 1;
            }
            rows.push(exported.iter().map(|&i| row[i]).collect());
            labels.push(u8::from(y));
        }
    }

    let features = exported
        .iter()
        .enumerate()
        .map(|(c, &i)| {
            let col: Vec<f64> = rows.iter().map(|r| r[c]).collect();
            net.feature_spec(i, &col)
        })
        .collect();
    let mut schema = Schema::new(features)?;
    schema.label = crate::data::DEFAULT_LABEL.to_string();
    Dataset::from_rows(schema, &rows, labels)
}

/// Shift `b` such that `mean(sigmoid(score + b)) = target`, found by bisection.
fn calibrate_offset(scores: &[f64], target: f64) -> f64 {
    if target <= 0.0 || target >= 1.0 {
        return 0.0;
    }
    let prevalence = |b: f64| scores.iter().map(|s| sigmoid(s + b)).sum::<f64>() / scores.len() as f64;
    let (mut lo, mut hi) = (-60.0, 60.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if prevalence(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Assigns random structural equations to a skeleton: Bernoulli or Gaussian
/// roots, linear-plus-tanh Gaussian children, and logistic binary children.
pub fn assign_random_equations(net: &mut BayesNet, seed: u64, binary_fraction: f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for node in &mut net.nodes {
        let k = node.parents.len();
        let binary = rng.random_bool(binary_fraction);
        let coef = |rng: &mut ChaCha8Rng| {
            let magnitude = rng.random_range(0.5..1.5);
            if rng.random_bool(0.5) {
                magnitude
            } else {
                -magnitude
            }
        };
        node.equation = Some(if k == 0 {
            if binary {
                Equation::Bernoulli {
                    p: rng.random_range(0.2..0.8),
                }
            } else {
                Equation::Gaussian { mean: 0.0, sd: 1.0 }
            }
        } else {
            let linear: Vec<f64> = (0..k).map(|_| coef(&mut rng) / (k as f64).sqrt()).collect();
            let tanh: Vec<f64> = (0..k).map(|_| coef(&mut rng) / (k as f64).sqrt()).collect();
            if binary {
                Equation::Logistic {
                    intercept: 0.0,
                    linear,
                    tanh,
                    quadratic: Vec::new(),
                }
            } else {
                Equation::Continuous {
                    intercept: 0.0,
                    linear,
                    tanh,
                    quadratic: Vec::new(),
                    noise_sd: 0.5,
                }
            }
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn root(name: &str, eq: Equation) -> Node {
        Node {
            name: name.into(),
            parents: vec![],
            equation: Some(eq),
            hidden: false,
        }
    }

    #[test]
    fn single_node_dag_has_no_edges() {
        let net = random_dag(1, 0.9, 3).unwrap();
        assert!(net.edges().is_empty());
        assert!(random_dag(0, 0.5, 1).is_err());
        assert!(random_dag(3, 1.5, 1).is_err());
    }

    #[test]
    fn random_dags_are_acyclic() {
        for seed in 0..200 {
            assert!(random_dag(12, 0.4, seed).unwrap().is_acyclic());
        }
    }

    #[test]
    fn mean_edge_count_matches_binomial_expectation() {
        let total: usize = (0..1000).map(|s| random_dag(20, 0.15, s).unwrap().edges().len()).sum();
        let mean = total as f64 / 1000.0;
        // 0.15 * C(20, 2)
        assert!((mean - 28.5).abs() < 1.5, "mean edge count {mean}");
    }

    #[test]
    fn cycle_detected() {
        let mut net = random_dag(2, 0.0, 0).unwrap();
        net.nodes[0].parents = vec![1];
        net.nodes[1].parents = vec![0];
        assert!(!net.is_acyclic());
    }

    #[test]
    fn bernoulli_root_frequency() {
        let net = BayesNet {
            nodes: vec![root("b", Equation::Bernoulli { p: 0.3 })],
            risk: None,
        };
        let s = sample_bayes_net(&net, 10_000, 11).unwrap();
        let freq = s.columns[0].iter().sum::<f64>() / 10_000.0;
        let sd = (0.3f64 * 0.7 / 10_000.0).sqrt();
        assert!((freq - 0.3).abs() < 3.0 * sd, "frequency {freq}");
    }

    #[test]
    fn copy_chain_is_identical() {
        let net = BayesNet {
            nodes: vec![
                root("x", Equation::Gaussian { mean: 1.0, sd: 2.0 }),
                Node {
                    name: "y".into(),
                    parents: vec![0],
                    equation: Some(Equation::Copy),
                    hidden: false,
                },
            ],
            risk: None,
        };
        let s = sample_bayes_net(&net, 500, 1).unwrap();
        assert_eq!(s.columns[0], s.columns[1]);
    }

    #[test]
    fn collider_parents_stay_independent() {
        let net = BayesNet {
            nodes: vec![
                root("x1", Equation::Gaussian { mean: 0.0, sd: 1.0 }),
                root("x2", Equation::Gaussian { mean: 0.0, sd: 1.0 }),
                Node {
                    name: "z".into(),
                    parents: vec![0, 1],
                    equation: Some(Equation::Continuous {
                        intercept: 0.0,
                        linear: vec![1.0, 1.0],
                        tanh: vec![],
                        quadratic: vec![],
                        noise_sd: 0.1,
                    }),
                    hidden: false,
                },
            ],
            risk: None,
        };
        let s = sample_bayes_net(&net, 10_000, 5).unwrap();
        let r = crate::eval::pearson(&s.columns[0], &s.columns[1]);
        assert!(r.abs() < 0.03, "corr {r}");
    }

    #[test]
    fn missing_equation_is_reported() {
        let net = random_dag(3, 0.5, 2).unwrap();
        assert!(matches!(sample_bayes_net(&net, 5, 0), Err(Error::UnassignedEquation(_))));
    }

    #[test]
    fn quota_sampling_hits_exact_counts() {
        let data = generate_risk_dataset(&fig3_spec(7), 300, 2700, 9).unwrap();
        assert_eq!(data.positives(), 300);
        assert_eq!(data.n_rows(), 3000);
        assert_eq!(data.n_features(), 20);
        let balanced = generate_risk_dataset(&fig3_spec(7), 400, 400, 9).unwrap();
        assert_eq!(balanced.positives(), 400);
    }

    #[test]
    fn generation_is_reproducible() {
        let a = generate_risk_dataset(&fig3_spec(2), 50, 450, 4).unwrap();
        let b = generate_risk_dataset(&fig3_spec(2), 50, 450, 4).unwrap();
        assert_eq!(a.to_csv_string().unwrap(), b.to_csv_string().unwrap());
    }

    #[test]
    fn unreachable_class_fails() {
        let net = BayesNet {
            nodes: vec![
                root("x", Equation::Bernoulli { p: 0.5 }),
                Node {
                    name: "r".into(),
                    parents: vec![0],
                    equation: Some(Equation::Logistic {
                        intercept: 0.0,
                        linear: vec![0.0],
                        tanh: vec![],
                        quadratic: vec![],
                    }),
                    hidden: false,
                },
            ],
            risk: Some(1),
        };
        // target prevalence 1 leaves the offset untouched, so negatives keep coming
        let err = generate_risk_dataset(&net, 10, 0, 1);
        assert!(err.is_ok());
        let mut degenerate = net.clone();
        degenerate.nodes[1].equation = Some(Equation::Logistic {
            intercept: -1e9,
            linear: vec![0.0],
            tanh: vec![],
            quadratic: vec![],
        });
        assert!(matches!(
            generate_risk_dataset(&degenerate, 5, 5, 1),
            Err(Error::GenerationFailed { .. })
        ));
    }

    #[test]
    fn spec_json_roundtrip() {
        let net = fig3_spec(3);
        assert_eq!(BayesNet::from_json(&net.to_json().unwrap()).unwrap(), net);
    }
}
