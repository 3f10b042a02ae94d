use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate sample: {0}")]
    DegenerateSample(&'static str),

    #[error("invalid noise spec: {0}")]
    InvalidSpec(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("class index {label} out of range for {classes} classes")]
    InvalidClass { label: usize, classes: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("certificates belong to different inputs ({0} vs {1})")]
    MismatchedInput(u64, u64),

    #[error("training diverged at epoch {epoch}, step {step}: loss is not finite")]
    Divergence { epoch: usize, step: usize },

    #[error("target clean accuracy {target:.4} unreachable; closest achieved {closest:.4}")]
    UnreachableTarget { target: f64, closest: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
