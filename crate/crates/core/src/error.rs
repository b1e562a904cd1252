use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("mesh mismatch: {0}")]
    MeshMismatch(String),

    #[error("function space mismatch: {0}")]
    SpaceMismatch(String),

    #[error("meshes are not nested: {0}")]
    NotNested(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("singular matrix{}", pivot.map(|p| format!(" (zero pivot at {p})")).unwrap_or_default())]
    Singular { pivot: Option<usize> },

    #[error("{method} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        method: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("right-hand side has a constant component {0:.3e}; expected zero mean")]
    NonzeroMean(f64),

    #[error("nonlinear solve failed at step {step}: {reason}; residual history {history:?}")]
    StepFailed {
        step: usize,
        reason: String,
        history: Vec<f64>,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("expression error at {pos}: {message}")]
    Expr { pos: usize, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
