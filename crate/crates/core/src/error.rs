use std::path::PathBuf;

/// Errors produced by the solver library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid spec: {field}: {reason}")]
    InvalidGrid { field: &'static str, reason: String },

    #[error("invalid model parameter: {field}: {reason}")]
    InvalidParams { field: &'static str, reason: String },

    #[error("invalid optimizer config: {0}")]
    InvalidConfig(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("incomplete boundary data: expected {expected} values, got {actual}")]
    IncompleteBoundary { expected: usize, actual: usize },

    #[error("non-finite value in {what} at time level {level}")]
    BlowUp { what: &'static str, level: usize },

    #[error("non-finite input value in {0}")]
    NonFinite(&'static str),

    #[error("unknown scenario `{name}` (available: {available})")]
    UnknownScenario { name: String, available: String },

    #[error("zero direction vector at index {0}")]
    ZeroDirection(usize),

    #[error("malformed control file {path}: line {line}: {reason}")]
    ControlFormat {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
