use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),
    #[error("feature {feature} is constant")]
    DegenerateFeature { feature: String },
    #[error("value {value} outside the domain of feature {feature}")]
    OutOfDomain { feature: String, value: f64 },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("structural equation missing for node {0}")]
    UnassignedEquation(String),
    #[error("could not reach the requested class counts after {attempts} draws")]
    GenerationFailed { attempts: usize },
    #[error("missing pair ({0}, {1})")]
    MissingPair(usize, usize),
    #[error("dataset has already been distilled")]
    AlreadyDistilled,
    #[error("{stage} failed{}: {source}", feature.as_ref().map(|f| format!(" for feature {f}")).unwrap_or_default())]
    Stage {
        stage: &'static str,
        feature: Option<String>,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable name of the innermost error.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::InvalidInput(_) => "invalid_input",
            Error::EmptyBatch => "empty_batch",
            Error::Diverged { .. } => "diverged",
            Error::DegenerateLabels(_) => "degenerate_labels",
            Error::DegenerateFeature { .. } => "degenerate_feature",
            Error::OutOfDomain { .. } => "out_of_domain",
            Error::Schema(_) => "schema",
            Error::UnassignedEquation(_) => "unassigned_equation",
            Error::GenerationFailed { .. } => "generation_failed",
            Error::MissingPair(..) => "missing_pair",
            Error::AlreadyDistilled => "already_distilled",
            Error::Stage { source, .. } => source.kind(),
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }

    /// Failing stage and feature, if the error was raised inside the pipeline.
    pub fn stage(&self) -> Option<(&'static str, Option<&str>)> {
        match self {
            Error::Stage { stage, feature, .. } => Some((stage, feature.as_deref())),
            _ => None,
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str, feature: Option<&str>) -> Self {
        Error::Stage {
            stage,
            feature: feature.map(str::to_owned),
            source: Box::new(self),
        }
    }
}
