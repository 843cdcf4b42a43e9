use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use causal_distill::attribution::AttributionMap;
use causal_distill::data::{format_value, Dataset};
use causal_distill::eval::significance_screen;
use causal_distill::nn::ModelDocument;
use causal_distill::pipeline::{
    apply_maps, distill_dataset, fit_propensities, run_end_to_end, screen_outcome, with_jobs, DistillConfig,
};
use causal_distill::risk::{metrics_from_predictions, RiskClassifier, RiskModelDocument};
use causal_distill::synth::{
    dose_response_benchmark, fig3_spec, generate_risk_dataset, hidden_variable_spec, role_labeled_benchmark,
    BayesNet, DoseResponseKind,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::Outputs;
use crate::plot::response_curve_svg;
use crate::{Cli, Command, DataArgs};

/// Classifier as written by `run-all`: the attribution maps (absent for the
/// raw-feature baseline) and the network that reads their output.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierDocument {
    pub features: Vec<String>,
    pub maps: Option<Vec<AttributionMap>>,
    pub classifier: RiskModelDocument,
}

struct Context {
    config: RunConfig,
    distill: DistillConfig,
    out: PathBuf,
    jobs: Option<usize>,
}

impl Context {
    fn parallel<T: Send>(&self, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
        match self.jobs {
            Some(jobs) => Ok(with_jobs(jobs, f)?),
            None => Ok(f()),
        }
    }

    fn load(&self, args: &DataArgs) -> Result<Dataset, CliError> {
        let data = args
            .data
            .clone()
            .or_else(|| self.config.data.clone())
            .ok_or_else(|| CliError::usage("no dataset given (--data or config `data`)"))?;
        let schema = args
            .schema
            .clone()
            .or_else(|| self.config.schema.clone())
            .ok_or_else(|| CliError::usage("no schema given (--schema or config `schema`)"))?;
        load_dataset(&data, &schema)
    }

    fn commit(&self, outputs: Outputs, command: &str, params: Value, seeded: bool) -> Result<(), CliError> {
        let hashed = json!({ "command": command, "params": params, "distill": self.distill });
        let (seed, stage_seeds) = if seeded {
            (Some(self.distill.seed), self.distill.stage_seeds())
        } else {
            (None, BTreeMap::new())
        };
        outputs.commit(&self.out, command, &hashed, seed, stage_seeds)
    }
}

fn load_dataset(data: &Path, schema: &Path) -> Result<Dataset, CliError> {
    for p in [schema, data] {
        if !p.is_file() {
            return Err(CliError::usage(format!("input file {} does not exist", p.display())));
        }
    }
    Dataset::load(data, schema).map_err(CliError::input)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::input(e.into()))
}

fn file_stem(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect()
}

fn dataset_files(outputs: &mut Outputs, data: &Dataset, csv: &str, schema: &str) -> Result<(), CliError> {
    outputs.add(csv, data.to_csv_string()?);
    outputs.add(schema, data.schema().to_json()? + "\n");
    Ok(())
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let config = RunConfig::load(cli.global.config.as_deref())?;
    let distill = config.resolved(cli.global.seed)?;
    let jobs = cli.global.jobs.or(config.jobs);
    if jobs == Some(0) {
        return Err(CliError::usage("--jobs must be at least 1"));
    }
    let out = cli
        .global
        .out
        .clone()
        .or_else(|| config.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let ctx = Context { config, distill, out, jobs };

    match cli.command {
        Command::Generate { spec, rows, positives, negatives } => {
            let (data, truth) = generate(&spec, rows, positives, negatives, ctx.distill.seed)?;
            let mut outputs = Outputs::default();
            dataset_files(&mut outputs, &data, "data.csv", "schema.json")?;
            outputs.add_json("truth.json", &truth)?;
            let params = json!({ "spec": spec, "rows": rows, "positives": positives, "negatives": negatives });
            ctx.commit(outputs, "generate", params, true)
        }
        Command::FitOutcome { input } => {
            let data = ctx.load(&input)?;
            let (lambda, fit) = ctx.parallel(|| screen_outcome(&data, &ctx.distill))??;
            let names = data.schema().names();
            let mut outputs = Outputs::default();
            outputs.add("outcome_weights.csv", fit.weights_csv(&names)?);
            outputs.add_json(
                "outcome_model.json",
                &json!({
                    "lambda": lambda,
                    "weights": fit.feature_weights(&names),
                    "encoder": fit.encoder,
                    "model": ModelDocument::from_net(&fit.net, None),
                }),
            )?;
            ctx.commit(outputs, "fit-outcome", json!({}), true)
        }
        Command::FitPropensity { input, features } => {
            let data = ctx.load(&input)?;
            let names = data.schema().names();
            let targets: Vec<usize> = if features.is_empty() {
                (0..names.len()).collect()
            } else {
                features
                    .iter()
                    .map(|f| {
                        data.schema()
                            .index_of(f)
                            .ok_or_else(|| CliError::usage(format!("unknown feature {f}")))
                    })
                    .collect::<Result<_, _>>()?
            };
            let (_, fits) = ctx.parallel(|| fit_propensities(&data, &ctx.distill, &targets))??;
            let theta = ctx.distill.theta_for(data.n_rows());
            let mut outputs = Outputs::default();
            for fit in &fits {
                let covariates: Vec<&String> = names.iter().enumerate().filter(|(m, _)| *m != fit.target).map(|(_, n)| n).collect();
                let norms = fit.covariate_norms();
                let rows: Vec<Value> = covariates
                    .iter()
                    .zip(&fit.weights.weights)
                    .zip(&norms)
                    .map(|((name, w), norm)| json!({ "covariate": name, "adaptive_weight": w, "norm": norm, "selected": *norm > 0.0 }))
                    .collect();
                outputs.add_json(
                    &format!("propensity/{}.json", file_stem(&names[fit.target])),
                    &json!({
                        "feature": names[fit.target],
                        "theta": theta,
                        "covariates": rows,
                        "encoder": fit.encoder,
                        "model": ModelDocument::from_net(&fit.net, None),
                    }),
                )?;
            }
            let chosen: Vec<&String> = targets.iter().map(|&j| &names[j]).collect();
            ctx.commit(outputs, "fit-propensity", json!({ "features": chosen }), true)
        }
        Command::Distill { input } => {
            let data = ctx.load(&input)?;
            let result = ctx.parallel(|| distill_dataset(&data, &ctx.distill))??;
            let names = data.schema().names();
            let mut outputs = Outputs::default();
            dataset_files(&mut outputs, &result.distilled, "distilled.csv", "distilled_schema.json")?;
            outputs.add_json("maps.json", &result.maps())?;
            outputs.add("outcome_weights.csv", result.outcome.weights_csv(&names)?);
            let summary: Vec<Value> = result
                .features
                .iter()
                .zip(&result.outcome.predictive_weights)
                .map(|(f, w)| json!({ "feature": f.map.feature, "predictive_weight": w, "cfi": f.map.cfi }))
                .collect();
            outputs.add_json(
                "report.json",
                &json!({ "lambda": result.lambda, "theta": result.theta, "features": summary, "warnings": result.warnings }),
            )?;
            ctx.commit(outputs, "distill", json!({}), true)
        }
        Command::Predict { input, model } => {
            let doc: ClassifierDocument = read_json(&model)?;
            let data = ctx.load(&input)?;
            if data.schema().names() != doc.features {
                return Err(CliError::input(causal_distill::Error::Schema(
                    "dataset features do not match the classifier".into(),
                )));
            }
            let classifier = RiskClassifier::from_document(&doc.classifier).map_err(CliError::input)?;
            let (inputs, warnings) = match &doc.maps {
                Some(maps) => apply_maps(maps, &data)?,
                None => (data, Vec::new()),
            };
            let mut outputs = Outputs::default();
            outputs.add("predictions.csv", predictions_csv(&classifier, &inputs)?);
            if !warnings.is_empty() {
                outputs.add_json("warnings.json", &warnings)?;
            }
            ctx.commit(outputs, "predict", json!({ "model": doc.classifier }), false)
        }
        Command::Evaluate { predictions, labels, label_column } => {
            let (truth, predicted, scores) = read_predictions(&predictions, labels.as_deref(), &label_column)?;
            let metrics = metrics_from_predictions(&truth, &predicted, scores.as_deref())?;
            let mut outputs = Outputs::default();
            outputs.add_json("metrics.json", &metrics)?;
            ctx.commit(outputs, "evaluate", json!({ "label_column": label_column }), false)
        }
        Command::Screen { input, distilled, distilled_schema, alpha } => {
            let alpha = alpha.unwrap_or(ctx.config.alpha());
            let original = ctx.load(&input)?;
            let distilled = load_dataset(&distilled, &distilled_schema)?;
            let report = significance_screen(&original, &distilled, alpha).map_err(CliError::input)?;
            let mut outputs = Outputs::default();
            outputs.add_json("screen.json", &report)?;
            ctx.commit(outputs, "screen", json!({ "alpha": alpha }), false)
        }
        Command::ResponseCurve { maps, feature, svg } => {
            let maps: Vec<AttributionMap> = read_json(&maps)?;
            let map = maps
                .iter()
                .find(|m| m.feature == feature)
                .ok_or_else(|| CliError::usage(format!("no response curve for feature {feature}")))?;
            let mut outputs = Outputs::default();
            let stem = file_stem(&feature);
            outputs.add(format!("curves/{stem}.csv"), curve_csv(map)?);
            if svg {
                outputs.add(format!("curves/{stem}.svg"), response_curve_svg(map));
            }
            ctx.commit(outputs, "response-curve", json!({ "feature": feature, "svg": svg }), false)
        }
        Command::RunAll { input, spec, alpha } => {
            let alpha = alpha.unwrap_or(ctx.config.alpha());
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(CliError::config(format!("alpha {alpha} outside (0, 1)")));
            }
            let mut outputs = Outputs::default();
            let data = match &spec {
                Some(spec) => {
                    let (data, truth) = generate(spec, 5000, 1000, 9000, ctx.distill.seed)?;
                    dataset_files(&mut outputs, &data, "data.csv", "schema.json")?;
                    outputs.add_json("truth.json", &truth)?;
                    data
                }
                None => ctx.load(&input)?,
            };
            let run = ctx.parallel(|| run_end_to_end(&data, &ctx.distill))??;
            let names = data.schema().names();
            let train = data.subset(&run.train_rows);
            let maps = run.distillation.maps();

            dataset_files(&mut outputs, &run.distillation.distilled, "distilled_train.csv", "distilled_schema.json")?;
            outputs.add("distilled_test.csv", run.test_distilled.to_csv_string()?);
            outputs.add_json("maps.json", &maps)?;
            outputs.add("outcome_weights.csv", run.distillation.outcome.weights_csv(&names)?);
            for map in &maps {
                outputs.add(format!("curves/{}.csv", file_stem(&map.feature)), curve_csv(map)?);
            }
            outputs.add_json(
                "classifier.json",
                &ClassifierDocument {
                    features: names.clone(),
                    maps: Some(maps.clone()),
                    classifier: run.classifier.to_document(),
                },
            )?;
            outputs.add_json(
                "baseline.json",
                &ClassifierDocument {
                    features: names.clone(),
                    maps: None,
                    classifier: run.baseline.to_document(),
                },
            )?;
            outputs.add("predictions_test.csv", predictions_csv(&run.classifier, &run.test_distilled)?);
            outputs.add_json("metrics.json", &run.report)?;
            let screen = significance_screen(&train, &run.distillation.distilled, alpha)?;
            outputs.add_json("screen.json", &screen)?;
            ctx.commit(outputs, "run-all", json!({ "spec": spec, "alpha": alpha }), true)
        }
    }
}

fn generate(spec: &str, rows: usize, positives: usize, negatives: usize, seed: u64) -> Result<(Dataset, Value), CliError> {
    let network = |net: BayesNet| -> Result<(Dataset, Value), CliError> {
        let data = generate_risk_dataset(&net, positives, negatives, seed)?;
        Ok((data, json!({ "network": net })))
    };
    match spec {
        "fig3" => network(fig3_spec(seed)),
        "fig4a" | "fig4b" => {
            let net = hidden_variable_spec(spec == "fig4b");
            let data = generate_risk_dataset(&net, positives, negatives, seed)?;
            let truth = json!({ "network": net, "cause": "X0", "spurious": ["X1", "X2", "X3"] });
            Ok((data, truth))
        }
        "roles" => {
            let b = role_labeled_benchmark(rows, seed)?;
            let truth = json!({
                "network": b.net,
                "intervention": b.data.schema().features[b.intervention].name,
                "roles": b.spec,
            });
            Ok((b.data, truth))
        }
        _ if spec.starts_with("dose-") => {
            let kind: DoseResponseKind = spec["dose-".len()..].parse().map_err(CliError::input)?;
            let b = dose_response_benchmark(kind, rows, seed)?;
            let column = b.data.column(b.intervention);
            let lo = column.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = column.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let curve: Vec<Value> = (0..21)
                .map(|k| {
                    let x = if k == 20 { hi } else { lo + (hi - lo) * k as f64 / 20.0 };
                    json!({ "x": x, "mu_true": b.mu_true(x), "naive_bias": b.naive_bias(x) })
                })
                .collect();
            let truth = json!({
                "kind": kind,
                "intervention": b.data.schema().features[b.intervention].name,
                "curve": curve,
            });
            Ok((b.data, truth))
        }
        path => {
            let path = Path::new(path);
            if !path.is_file() {
                return Err(CliError::usage(format!(
                    "unknown spec {spec:?}: not a built-in name and no such file"
                )));
            }
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
            let net = BayesNet::from_json(&text).map_err(CliError::input)?;
            network(net)
        }
    }
}

fn predictions_csv(classifier: &RiskClassifier, data: &Dataset) -> Result<String, CliError> {
    let label = &data.schema().label;
    let mut text = format!("probability,prediction,{label}\n");
    for ((p, y_hat), y) in classifier.predict_dataset(data)?.into_iter().zip(data.labels()) {
        text.push_str(&format!("{},{y_hat},{y}\n", format_value(p)));
    }
    Ok(text)
}

fn curve_csv(map: &AttributionMap) -> Result<String, CliError> {
    let cfa = map.cfa();
    let mut text = String::from("value,mu,cfa,gradient_label\n");
    for (k, (x, mu)) in map.grid.iter().zip(&map.mu).enumerate() {
        // the label describes the segment that starts at this grid point
        let label = map.gradient_labels.get(k).map(|l| l.as_str()).unwrap_or("");
        text.push_str(&format!("{},{},{},{label}\n", format_value(*x), format_value(*mu), format_value(cfa[k])));
    }
    Ok(text)
}

type PredictionColumns = (Vec<u8>, Vec<u8>, Option<Vec<f64>>);

fn read_predictions(path: &Path, labels: Option<&Path>, label_column: &str) -> Result<PredictionColumns, CliError> {
    let read = |p: &Path| -> Result<(Vec<String>, Vec<csv::StringRecord>), CliError> {
        let mut reader = csv::Reader::from_path(p).map_err(|e| CliError::usage(format!("{}: {e}", p.display())))?;
        let header = reader
            .headers()
            .map_err(|e| CliError::input(e.into()))?
            .iter()
            .map(str::to_string)
            .collect();
        let records = reader.records().collect::<Result<Vec<_>, _>>().map_err(|e| CliError::input(e.into()))?;
        Ok((header, records))
    };
    let column = |header: &[String], name: &str| header.iter().position(|h| h == name);
    let bad = |m: String| CliError::input(causal_distill::Error::InvalidInput(m));
    let binary = |field: &str| match field.trim() {
        "0" => Ok(0u8),
        "1" => Ok(1u8),
        other => Err(bad(format!("expected 0/1, found {other:?}"))),
    };

    let (header, records) = read(path)?;
    let pred_col = column(&header, "prediction").ok_or_else(|| bad("predictions need a `prediction` column".into()))?;
    let predicted = records.iter().map(|r| binary(&r[pred_col])).collect::<Result<Vec<_>, _>>()?;
    let scores = match column(&header, "probability") {
        Some(c) => Some(
            records
                .iter()
                .map(|r| r[c].trim().parse::<f64>().map_err(|_| bad(format!("bad probability {:?}", &r[c]))))
                .collect::<Result<Vec<_>, _>>()?,
        ),
        None => None,
    };
    let truth = match labels {
        Some(p) => {
            let (h, recs) = read(p)?;
            let c = column(&h, label_column).ok_or_else(|| bad(format!("labels file has no `{label_column}` column")))?;
            recs.iter().map(|r| binary(&r[c])).collect::<Result<Vec<_>, _>>()?
        }
        None => {
            let c = column(&header, label_column)
                .ok_or_else(|| bad(format!("predictions have no `{label_column}` column; pass --labels")))?;
            records.iter().map(|r| binary(&r[c])).collect::<Result<Vec<_>, _>>()?
        }
    };
    if truth.len() != predicted.len() {
        return Err(bad(format!("{} labels for {} predictions", truth.len(), predicted.len())));
    }
    Ok((truth, predicted, scores))
}
