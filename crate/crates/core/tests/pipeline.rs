use causal_distill::attribution::{causal_feature_attribution, Baseline};
use causal_distill::pipeline::{apply_maps, distill_dataset, run_end_to_end, with_jobs, DistillConfig, OptimizerConfig};
use causal_distill::synth::{dose_response_benchmark, hidden_variable_pair_sized, DoseResponseKind};
use causal_distill::Error;

fn quick_config(seed: u64) -> DistillConfig {
    let fast = OptimizerConfig {
        epochs: 40,
        ..OptimizerConfig::default()
    };
    DistillConfig {
        seed,
        sigma_optimizer: OptimizerConfig {
            epochs: 40,
            ..DistillConfig::default().sigma_optimizer
        },
        optimizer: fast,
        outcome_hidden: vec![8],
        propensity_hidden: vec![8, 4],
        sigma_hidden: vec![8],
        risk_hidden: vec![8],
        mixture_components: 2,
        ..DistillConfig::default()
    }
}

#[test]
fn distilled_values_satisfy_attribution_invariants() {
    let b = dose_response_benchmark(DoseResponseKind::ConfoundedLinear, 600, 5).unwrap();
    let d = distill_dataset(&b.data, &quick_config(5)).unwrap();
    assert!(d.distilled.is_distilled());
    assert_eq!(d.distilled.n_rows(), 600);
    for f in &d.features {
        let map = &f.map;
        assert!(map.mu.iter().all(|m| (0.0..=1.0).contains(m)));
        assert!(map.cfi >= 0.0);
        let centred = causal_feature_attribution(map, Baseline::CurveMean).unwrap();
        assert!(centred.iter().sum::<f64>().abs() / centred.len() as f64 <= 1e-9);
        assert_eq!(causal_feature_attribution(map, Baseline::Zero).unwrap(), map.mu);
        let (lo, hi) = map.cfa_range();
        let j = map.index;
        assert!(d.distilled.column(j).iter().all(|v| (lo..=hi).contains(v)));
    }
    // the binary confounder keeps its two levels
    assert_eq!(d.features[1].map.grid, vec![0.0, 1.0]);
}

#[test]
fn distilled_data_cannot_be_distilled_again() {
    let b = dose_response_benchmark(DoseResponseKind::Randomized, 300, 1).unwrap();
    let d = distill_dataset(&b.data, &quick_config(1)).unwrap();
    assert!(matches!(distill_dataset(&d.distilled, &quick_config(1)), Err(Error::AlreadyDistilled)));
    assert!(matches!(apply_maps(&d.maps(), &d.distilled), Err(Error::AlreadyDistilled)));
}

#[test]
fn thread_count_does_not_change_results() {
    let pair = hidden_variable_pair_sized(60, 540, 2).unwrap();
    let config = quick_config(8);
    let one = with_jobs(1, || run_end_to_end(&pair.with_hidden, &config)).unwrap().unwrap();
    let three = with_jobs(3, || run_end_to_end(&pair.with_hidden, &config)).unwrap().unwrap();
    assert_eq!(
        one.distillation.distilled.to_csv_string().unwrap(),
        three.distillation.distilled.to_csv_string().unwrap()
    );
    assert_eq!(
        serde_json::to_string(&one.report).unwrap(),
        serde_json::to_string(&three.report).unwrap()
    );
    assert_eq!(one.report.n_train + one.report.n_test, 600);
}

#[test]
fn config_rejects_unknown_keys_and_roundtrips() {
    let config = DistillConfig::default();
    let json = serde_json::to_string(&config).unwrap();
    assert_eq!(serde_json::from_str::<DistillConfig>(&json).unwrap(), config);
    assert!(serde_json::from_str::<DistillConfig>(r#"{"thetta": 1}"#).is_err());
    let bad = DistillConfig {
        grid_points: 1,
        ..DistillConfig::default()
    };
    assert!(bad.validate().is_err());
}

#[test]
fn single_class_input_fails_in_the_outcome_stage() {
    let b = dose_response_benchmark(DoseResponseKind::Randomized, 200, 4).unwrap();
    let zeros = b.data.with_labels(vec![0; 200]).unwrap();
    assert!(distill_dataset(&zeros, &quick_config(4)).is_err());
}
