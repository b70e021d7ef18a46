use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Why a motor size (or a single solve) has no feasible design.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Infeasibility {
    /// Motor size the record refers to [W].
    pub p_em_max: f64,
    /// Names of the binding constraints, e.g. `acceleration` or `overspeed (step 41)`.
    pub constraints: Vec<String>,
    pub detail: String,
}

impl std::fmt::Display for Infeasibility {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "P_em,max = {} W: {} ({})",
            self.p_em_max,
            self.constraints.join(", "),
            self.detail
        )
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("fit error: {0}")]
    Fit(String),
    #[error("transcription error: {0}")]
    Transcription(String),
    #[error("infeasible: {0}")]
    Infeasible(Infeasibility),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("mass fixed point did not converge after {iterations} iterations (trace {trace:?})")]
    NonConvergence { iterations: usize, trace: Vec<f64> },
    #[error("every motor size in the sweep is infeasible: {}", list_sizes(.0))]
    SweepInfeasible(Vec<Infeasibility>),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn list_sizes(records: &[Infeasibility]) -> String {
    records.iter().map(|r| r.to_string()).collect::<Vec<_>>().join("; ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
