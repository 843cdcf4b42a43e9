use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_causal-distill"));
    for (key, _) in std::env::vars() {
        if key.starts_with("CAUSAL_DISTILL_") {
            cmd.env_remove(key);
        }
    }
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn error_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().expect("error JSON on stderr");
    serde_json::from_str(line).unwrap()
}

const FAST_CONFIG: &str = r#"{
  "distill": {
    "outcome_hidden": [8],
    "propensity_hidden": [8, 4],
    "sigma_hidden": [8],
    "risk_hidden": [8],
    "mixture_components": 2,
    "optimizer": {"epochs": 30},
    "sigma_optimizer": {"epochs": 30, "learning_rate": 0.05, "batch_size": 32, "weight_decay": 0.0}
  }
}"#;

fn small_dataset(dir: &Path) -> (PathBuf, PathBuf, PathBuf) {
    let gen = dir.join("gen");
    let out = run(&["generate", "--spec", "fig4b", "--positives", "40", "--negatives", "360", "--seed", "2", "--out", s(&gen)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let config = dir.join("config.json");
    std::fs::write(&config, FAST_CONFIG).unwrap();
    (gen.join("data.csv"), gen.join("schema.json"), config)
}

#[test]
fn every_subcommand_documents_the_shared_flags() {
    for sub in [
        "generate",
        "fit-outcome",
        "fit-propensity",
        "distill",
        "predict",
        "evaluate",
        "screen",
        "response-curve",
        "run-all",
    ] {
        let out = run(&[sub, "--help"]);
        assert!(out.status.success(), "{sub}");
        let help = String::from_utf8_lossy(&out.stdout);
        for flag in ["--config", "--seed", "--jobs", "--out"] {
            assert!(help.contains(flag), "{sub} help lacks {flag}");
        }
    }
}

#[test]
fn generate_fig4b_writes_four_features_and_label() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["generate", "--spec", "fig4b", "--seed", "1", "--out", s(dir.path())]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("data.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "X0,X1,X2,X3,risk");
    assert_eq!(csv.lines().count(), 10_001);
    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 1);
    assert_eq!(manifest["artifacts"].as_array().unwrap().len(), 3);
}

#[test]
fn usage_and_config_errors_exit_two_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("never");

    let out = run(&["distill", "--data", "x.csv", "--schema", "missing.json", "--out", s(&target)]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"]["exit_code"], 2);
    assert!(!target.exists());

    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"]["kind"], "usage");

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"distill": {"lamda": 0.1}}"#).unwrap();
    let out = run(&["generate", "--spec", "fig4a", "--config", s(&bad), "--out", s(&target)]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"]["kind"], "config");
    assert!(!target.exists());

    let out = run(&["generate", "--spec", "no-such-generator", "--out", s(&target)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn stage_failures_exit_one_with_the_stage_named() {
    let dir = tempfile::tempdir().unwrap();
    let (data, schema, config) = small_dataset(dir.path());
    let text = std::fs::read_to_string(&data).unwrap();
    let negatives: String = text
        .lines()
        .enumerate()
        .map(|(i, l)| if i == 0 { format!("{l}\n") } else { format!("{},0\n", l.rsplit_once(',').unwrap().0) })
        .collect();
    let flat = dir.path().join("flat.csv");
    std::fs::write(&flat, negatives).unwrap();
    let out = run(&["distill", "--config", s(&config), "--data", s(&flat), "--schema", s(&schema), "--out", s(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(1));
    let err = error_json(&out);
    assert_eq!(err["error"]["stage"], "outcome");
    assert_eq!(err["error"]["kind"], "degenerate_labels");
}

#[test]
fn environment_overrides_config_and_flags_override_environment() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.json");
    std::fs::write(&config, r#"{"seed": 5}"#).unwrap();
    let read_seed = |out: &Path| -> Value {
        let m: Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
        m["seed"].clone()
    };
    let a = dir.path().join("a");
    let status = bin()
        .args(["generate", "--spec", "dose-randomized", "--rows", "50", "--config", s(&config), "--out", s(&a)])
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(read_seed(&a), 5);

    let b = dir.path().join("b");
    let status = bin()
        .env("CAUSAL_DISTILL_SEED", "6")
        .args(["generate", "--spec", "dose-randomized", "--rows", "50", "--config", s(&config), "--out", s(&b)])
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(read_seed(&b), 6);

    let c = dir.path().join("c");
    let status = bin()
        .env("CAUSAL_DISTILL_SEED", "6")
        .env("CAUSAL_DISTILL_OUT", s(&c))
        .args(["generate", "--spec", "dose-randomized", "--rows", "50", "--seed", "7"])
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(read_seed(&c), 7);
}

#[test]
fn run_all_outputs_feed_predict_evaluate_screen_and_curves() {
    let dir = tempfile::tempdir().unwrap();
    let (data, schema, config) = small_dataset(dir.path());
    let runs = dir.path().join("run");
    let out = run(&["run-all", "--config", s(&config), "--data", s(&data), "--schema", s(&schema), "--out", s(&runs)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for file in ["maps.json", "metrics.json", "screen.json", "classifier.json", "baseline.json", "distilled_test.csv", "curves/X0.csv"] {
        assert!(runs.join(file).is_file(), "{file}");
    }

    let pred = dir.path().join("pred");
    let out = run(&["predict", "--model", s(&runs.join("classifier.json")), "--data", s(&data), "--schema", s(&schema), "--out", s(&pred)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(pred.join("predictions.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "probability,prediction,risk");
    assert_eq!(csv.lines().count(), 401);

    let eval = dir.path().join("eval");
    let out = run(&["evaluate", "--predictions", s(&pred.join("predictions.csv")), "--out", s(&eval)]);
    assert!(out.status.success());
    let metrics: Value = serde_json::from_str(&std::fs::read_to_string(eval.join("metrics.json")).unwrap()).unwrap();
    let counts = &metrics["counts"];
    let total: u64 = ["tp", "fp", "fn_", "tn"].iter().map(|k| counts[k].as_u64().unwrap()).sum();
    assert_eq!(total, 400);

    let curve = dir.path().join("curve");
    let out = run(&["response-curve", "--maps", s(&runs.join("maps.json")), "--feature", "X0", "--svg", "--out", s(&curve)]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(curve.join("curves/X0.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "value,mu,cfa,gradient_label");
    assert_eq!(csv.lines().count(), 22);
    assert!(std::fs::read_to_string(curve.join("curves/X0.svg")).unwrap().starts_with("<svg"));

    let distilled = dir.path().join("distilled");
    let out = run(&["distill", "--config", s(&config), "--data", s(&data), "--schema", s(&schema), "--out", s(&distilled)]);
    assert!(out.status.success());
    let screen = dir.path().join("screen");
    let out = run(&[
        "screen",
        "--data",
        s(&data),
        "--schema",
        s(&schema),
        "--distilled",
        s(&distilled.join("distilled.csv")),
        "--distilled-schema",
        s(&distilled.join("distilled_schema.json")),
        "--alpha",
        "0.01",
        "--out",
        s(&screen),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(screen.join("screen.json")).unwrap()).unwrap();
    assert_eq!(report["alpha"], 0.01);
    assert_eq!(report["features"].as_array().unwrap().len(), 4);
}

#[test]
fn fit_commands_write_per_feature_reports() {
    let dir = tempfile::tempdir().unwrap();
    let (data, schema, config) = small_dataset(dir.path());
    let o = dir.path().join("o");
    let out = run(&["fit-outcome", "--config", s(&config), "--data", s(&data), "--schema", s(&schema), "--out", s(&o)]);
    assert!(out.status.success());
    let weights = std::fs::read_to_string(o.join("outcome_weights.csv")).unwrap();
    assert_eq!(weights.lines().count(), 5);

    let p = dir.path().join("p");
    let out = run(&[
        "fit-propensity", "--config", s(&config), "--data", s(&data), "--schema", s(&schema), "--feature", "X1", "--feature", "X3", "--out", s(&p),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(p.join("propensity/X1.json")).unwrap()).unwrap();
    assert_eq!(doc["covariates"].as_array().unwrap().len(), 3);
    assert!(p.join("propensity/X3.json").is_file());
    assert!(!p.join("propensity/X0.json").exists());

    let out = run(&["fit-propensity", "--data", s(&data), "--schema", s(&schema), "--feature", "nope", "--out", s(&dir.path().join("q"))]);
    assert_eq!(out.status.code(), Some(2));
}
