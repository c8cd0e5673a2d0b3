use thiserror::Error;

/// Errors produced by mesh construction, assembly, linear algebra and time stepping.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("space mismatch: {0}")]
    SpaceMismatch(String),

    #[error("incompatible meshes: {0}")]
    IncompatibleMeshes(String),

    #[error("spaces are not nested: {0}")]
    NonNestedSpaces(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("singular matrix: {0}")]
    SingularMatrix(String),

    #[error("iteration did not converge after {iterations} iterations (last change {last_change:e})")]
    NonConverged { iterations: usize, last_change: f64 },

    #[error("Picard iteration failed after {iterations} iterations (relative update {last_update:e})")]
    PicardDiverged { iterations: usize, last_update: f64 },

    #[error("constraint violated: {0}")]
    ConstraintViolation(String),

    #[error("step {step} at t = {t}: {source}")]
    Step {
        step: usize,
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("not enough data for a rate fit: {0}")]
    InsufficientData(String),

    #[error("nonpositive value in rate fit: {0}")]
    NonpositiveValue(f64),

    #[error("{path}: {message}")]
    Io { path: String, message: String },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::SingularMatrix(_)
            | Error::NonConverged { .. }
            | Error::PicardDiverged { .. }
            | Error::ConstraintViolation(_) => true,
            Error::Step { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
