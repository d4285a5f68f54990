use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] simcf_core::Error),

    #[error("invalid experiment spec: {0}")]
    Spec(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("{0} oracle check(s) failed")]
    Validation(usize),
}

impl HarnessError {
    pub fn kind(&self) -> &'static str {
        match self {
            HarnessError::Core(simcf_core::Error::TooFewSamples { .. }) => "too_few_samples",
            HarnessError::Core(_) => "model",
            HarnessError::Spec(_) => "spec",
            HarnessError::Json(_) => "json",
            HarnessError::Csv(_) => "csv",
            HarnessError::Io(_) => "io",
            HarnessError::Validation(_) => "validation",
        }
    }

    /// Machine-readable record printed by the CLI on failure.
    pub fn record(&self) -> ErrorRecord {
        ErrorRecord {
            error: self.kind(),
            message: self.to_string(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ErrorRecord {
    pub error: &'static str,
    pub message: String,
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
