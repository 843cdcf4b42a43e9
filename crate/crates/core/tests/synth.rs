use causal_distill::synth::{
    assign_random_equations, dose_response_benchmark, fig3_spec, generate_risk_dataset, hidden_variable_pair_sized,
    random_dag, role_labeled_benchmark, sample_bayes_net, BayesNet, DoseResponseKind, Role, RoleLabeledSpec,
};
use proptest::prelude::*;

#[test]
fn fig3_dataset_has_exact_class_counts() {
    let net = fig3_spec(11);
    let data = generate_risk_dataset(&net, 1000, 9000, 11).unwrap();
    assert_eq!(data.n_rows(), 10_000);
    assert_eq!(data.positives(), 1000);
    assert_eq!(data.n_features(), 20);
}

#[test]
fn generators_are_bit_reproducible() {
    let a = generate_risk_dataset(&fig3_spec(2), 50, 450, 9).unwrap();
    let b = generate_risk_dataset(&fig3_spec(2), 50, 450, 9).unwrap();
    assert_eq!(a.to_csv_string().unwrap(), b.to_csv_string().unwrap());
    let c = generate_risk_dataset(&fig3_spec(2), 50, 450, 10).unwrap();
    assert_ne!(a.to_csv_string().unwrap(), c.to_csv_string().unwrap());
}

#[test]
fn network_json_roundtrip() {
    let net = fig3_spec(4);
    let back = BayesNet::from_json(&net.to_json().unwrap()).unwrap();
    assert_eq!(back, net);
    assert!(BayesNet::from_json(r#"{"nodes": [], "risk": null, "extra": 1}"#).is_err());
}

#[test]
fn hidden_pair_exports_four_features() {
    let pair = hidden_variable_pair_sized(100, 900, 3).unwrap();
    for data in [&pair.without_hidden, &pair.with_hidden] {
        assert_eq!(data.schema().names(), ["X0", "X1", "X2", "X3"]);
        assert_eq!(data.positives(), 100);
    }
}

#[test]
fn role_benchmark_labels_follow_the_graph() {
    let b = role_labeled_benchmark(200, 1).unwrap();
    let expect = [
        ("C1", Role::Confounder),
        ("P2", Role::Adjustment),
        ("I1", Role::Instrumental),
        ("S2", Role::Spurious),
    ];
    for (name, role) in expect {
        assert_eq!(b.spec.role_of(name), Some(role), "{name}");
    }
    assert_eq!(b.spec.roles.len(), 8);
}

#[test]
fn randomized_dose_truth_is_the_conditional_mean() {
    let b = dose_response_benchmark(DoseResponseKind::Randomized, 200_000, 3).unwrap();
    for x0 in [-1.0, 0.0, 0.8] {
        let (mut s, mut c) = (0.0, 0.0);
        for (row, &y) in b.data.rows().zip(b.data.labels()) {
            if (row[0] - x0).abs() < 0.05 {
                s += f64::from(y);
                c += 1.0;
            }
        }
        assert!((s / c - b.mu_true(x0)).abs() < 0.03, "x {x0}: {} vs {}", s / c, b.mu_true(x0));
        assert_eq!(b.naive_bias(x0), 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_dags_are_acyclic(n in 1usize..30, p in 0.0f64..1.0, seed in any::<u64>()) {
        let net = random_dag(n, p, seed).unwrap();
        prop_assert!(net.is_acyclic());
        let order = net.topological_order().unwrap();
        let mut pos = vec![0; n];
        for (k, &v) in order.iter().enumerate() {
            pos[v] = k;
        }
        for (v, node) in net.nodes.iter().enumerate() {
            for &p in &node.parents {
                prop_assert!(pos[p] < pos[v]);
            }
        }
    }

    #[test]
    fn roles_agree_with_reachability(seed in any::<u64>()) {
        let mut net = random_dag(8, 0.3, seed).unwrap();
        assign_random_equations(&mut net, seed, 0.3);
        let (t, y) = (3, 7);
        let spec = RoleLabeledSpec::from_graph(&net, t, y);
        for (name, role) in &spec.roles {
            let v = net.index_of(name).unwrap();
            prop_assert_eq!(net.has_directed_path(v, t), matches!(role, Role::Confounder | Role::Instrumental));
        }
    }

    #[test]
    fn sampling_is_reproducible(seed in any::<u64>()) {
        let mut net = random_dag(6, 0.4, seed).unwrap();
        assign_random_equations(&mut net, seed, 0.5);
        let a = sample_bayes_net(&net, 20, seed).unwrap();
        let b = sample_bayes_net(&net, 20, seed).unwrap();
        prop_assert_eq!(a, b);
    }
}
