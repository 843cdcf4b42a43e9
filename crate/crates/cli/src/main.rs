mod commands;
mod config;
mod error;
mod output;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::{CliError, EXIT_USAGE};

/// Causal feature distillation for imbalanced risk prediction.
///
/// Every option can also be set through an environment variable with the
/// CAUSAL_DISTILL_ prefix; explicit flags win over the environment, which wins
/// over the config file.
#[derive(Debug, Parser)]
#[command(name = "causal-distill", version, propagate_version = true)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Strict JSON run configuration; unknown keys are rejected.
    #[arg(long, global = true, env = "CAUSAL_DISTILL_CONFIG")]
    pub config: Option<PathBuf>,
    /// Master seed [default: config value, else 0].
    #[arg(long, global = true, env = "CAUSAL_DISTILL_SEED")]
    pub seed: Option<u64>,
    /// Worker threads for per-feature fits; results do not depend on it [default: all cores].
    #[arg(long, global = true, env = "CAUSAL_DISTILL_JOBS")]
    pub jobs: Option<usize>,
    /// Output directory [default: config value, else "out"].
    #[arg(long, global = true, env = "CAUSAL_DISTILL_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
pub struct DataArgs {
    /// Dataset CSV with a header and the label column [default: config `data`].
    #[arg(long, env = "CAUSAL_DISTILL_DATA")]
    pub data: Option<PathBuf>,
    /// Schema JSON describing every column [default: config `schema`].
    #[arg(long, env = "CAUSAL_DISTILL_SCHEMA")]
    pub schema: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset with its ground truth.
    Generate {
        /// fig3, fig4a, fig4b, roles, dose-randomized, dose-confounded-linear,
        /// dose-confounded-nonlinear, or the path of a network JSON file.
        #[arg(long)]
        spec: String,
        /// Rows for the roles and dose benchmarks.
        #[arg(long, default_value_t = 5000)]
        rows: usize,
        /// Positive rows for network generators.
        #[arg(long, default_value_t = 1000)]
        positives: usize,
        /// Negative rows for network generators.
        #[arg(long, default_value_t = 9000)]
        negatives: usize,
    },
    /// Fit the Group-Lasso outcome screen and report predictive weights.
    FitOutcome {
        #[command(flatten)]
        input: DataArgs,
    },
    /// Fit adaptive propensity models after the outcome screen.
    FitPropensity {
        #[command(flatten)]
        input: DataArgs,
        /// Feature to model; repeat for several [default: every feature].
        #[arg(long = "feature")]
        features: Vec<String>,
    },
    /// Distill a dataset into causal attributions.
    Distill {
        #[command(flatten)]
        input: DataArgs,
    },
    /// Score a dataset with a classifier written by run-all.
    Predict {
        #[command(flatten)]
        input: DataArgs,
        /// Classifier document (classifier.json or baseline.json).
        #[arg(long)]
        model: PathBuf,
    },
    /// Confusion metrics of a predictions CSV.
    Evaluate {
        /// CSV with a `prediction` column, optionally `probability` and the label.
        #[arg(long)]
        predictions: PathBuf,
        /// Separate CSV holding the label column [default: the predictions file].
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Name of the label column.
        #[arg(long, default_value = "risk")]
        label_column: String,
    },
    /// Class-difference significance of each feature before and after distillation.
    Screen {
        #[command(flatten)]
        input: DataArgs,
        /// Distilled dataset CSV.
        #[arg(long)]
        distilled: PathBuf,
        /// Schema of the distilled dataset.
        #[arg(long)]
        distilled_schema: PathBuf,
        /// Significance level [default: config `alpha`, else 0.05].
        #[arg(long, env = "CAUSAL_DISTILL_ALPHA")]
        alpha: Option<f64>,
    },
    /// Export one response curve with its attributions.
    ResponseCurve {
        /// Attribution maps written by distill or run-all.
        #[arg(long)]
        maps: PathBuf,
        #[arg(long)]
        feature: String,
        /// Also write an SVG chart.
        #[arg(long)]
        svg: bool,
    },
    /// Split, distill, train both classifiers and evaluate on the held-out part.
    RunAll {
        #[command(flatten)]
        input: DataArgs,
        /// Generate the input instead of reading it (same names as `generate`).
        #[arg(long, conflicts_with_all = ["data", "schema"])]
        spec: Option<String>,
        /// Significance level of the screen [default: config `alpha`, else 0.05].
        #[arg(long, env = "CAUSAL_DISTILL_ALPHA")]
        alpha: Option<f64>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("CAUSAL_DISTILL_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let err = CliError::usage(e.to_string().trim_end().to_string());
            eprintln!("{}", err.to_json());
            return ExitCode::from(EXIT_USAGE as u8);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", err.to_json());
            ExitCode::from(err.code as u8)
        }
    }
}
