use thiserror::Error;

/// Errors raised by model fitting, diagnostics and the online engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoxError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("block {k} has no events")]
    DegenerateBlock { k: usize },

    #[error("empty risk set at time {t}")]
    EmptyRiskSet { t: f64 },

    #[error("covariate dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("singular information matrix{}", context_suffix(.0))]
    SingularInformation(String),

    #[error("monotone likelihood: |beta| exceeded {bound} after {iterations} iterations")]
    Separation { bound: f64, iterations: usize },

    #[error("invalid time {t} for log transform")]
    InvalidTime { t: f64 },

    #[error("singular H matrix")]
    SingularH,

    #[error("Cox fit did not converge after {iterations} iterations (|U| = {score_norm:e})")]
    NotConverged { iterations: usize, score_norm: f64 },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

fn context_suffix(s: &str) -> String {
    if s.is_empty() {
        String::new()
    } else {
        format!(" ({s})")
    }
}

pub type Result<T> = std::result::Result<T, CoxError>;
