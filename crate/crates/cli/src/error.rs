use serde_json::{json, Value};
use thiserror::Error;

use microsize::Error as CoreError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("artifact error: {0}")]
    Artifact(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type CliResult<T> = Result<T, CliError>;

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl CliError {
    /// 2 config, 3 infeasible study, 4 solver failure, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Artifact(_) => 2,
            CliError::Core(CoreError::Parse(_) | CoreError::Validation(_) | CoreError::Fit(_)) => 2,
            CliError::Core(CoreError::Infeasible(_) | CoreError::SweepInfeasible(_)) => 3,
            CliError::Core(CoreError::Solver(_) | CoreError::NonConvergence { .. }) => 4,
            _ => 1,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Artifact(_) => "artifact",
            CliError::Io(_) => "io",
            CliError::Core(e) => match e {
                CoreError::Parse(_) => "parse",
                CoreError::Validation(_) => "validation",
                CoreError::Fit(_) => "fit",
                CoreError::Transcription(_) => "transcription",
                CoreError::Infeasible(_) | CoreError::SweepInfeasible(_) => "infeasible",
                CoreError::Solver(_) => "solver",
                CoreError::NonConvergence { .. } => "non_convergence",
                CoreError::Io(_) => "io",
                CoreError::Csv(_) => "csv",
                CoreError::Json(_) => "json",
            },
        }
    }

    pub fn to_json(&self) -> Value {
        let mut body = json!({
            "kind": self.kind(),
            "exit_code": self.exit_code(),
            "message": self.to_string(),
        });
        match self {
            CliError::Core(CoreError::Infeasible(i)) => body["infeasible"] = json!([i]),
            CliError::Core(CoreError::SweepInfeasible(records)) => body["infeasible"] = json!(records),
            CliError::Core(CoreError::NonConvergence { trace, .. }) => body["mass_trace_kg"] = json!(trace),
            _ => {}
        }
        json!({ "error": body })
    }
}
