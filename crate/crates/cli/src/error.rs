use serde_json::json;

/// Exit code 2: usage, configuration or input problems, detected before any output.
pub const EXIT_USAGE: i32 = 2;
/// Exit code 1: a pipeline stage failed.
pub const EXIT_STAGE: i32 = 1;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub kind: String,
    pub message: String,
    pub stage: Option<String>,
    pub feature: Option<String>,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self::plain(EXIT_USAGE, "usage", message)
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::plain(EXIT_USAGE, "config", message)
    }

    fn plain(code: i32, kind: &str, message: impl Into<String>) -> Self {
        Self {
            code,
            kind: kind.into(),
            message: message.into(),
            stage: None,
            feature: None,
        }
    }

    /// Failure while reading or validating inputs.
    pub fn input(e: causal_distill::Error) -> Self {
        Self {
            code: EXIT_USAGE,
            kind: format!("input_{}", e.kind()),
            message: e.to_string(),
            stage: None,
            feature: None,
        }
    }

    pub fn stage(e: causal_distill::Error) -> Self {
        let (stage, feature) = match e.stage() {
            Some((s, f)) => (Some(s.to_string()), f.map(str::to_string)),
            None => (None, None),
        };
        Self {
            code: EXIT_STAGE,
            kind: e.kind().to_string(),
            message: e.to_string(),
            stage,
            feature,
        }
    }

    pub fn io(what: &str, e: std::io::Error) -> Self {
        Self::plain(EXIT_STAGE, "io", format!("{what}: {e}"))
    }

    pub fn to_json(&self) -> String {
        json!({
            "error": {
                "kind": self.kind,
                "message": self.message,
                "stage": self.stage,
                "feature": self.feature,
                "exit_code": self.code,
            }
        })
        .to_string()
    }
}

impl From<causal_distill::Error> for CliError {
    fn from(e: causal_distill::Error) -> Self {
        Self::stage(e)
    }
}
