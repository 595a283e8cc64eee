use thiserror::Error;

/// Errors raised anywhere in the integrator stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("wavenumber index ({p}, {q}) out of range for n = {n}")]
    IndexOutOfRange { p: i64, q: i64, n: usize },

    #[error("backward linear step rejected (tau = {tau}); enable allow_backward to permit it")]
    BackwardStep { tau: f64 },

    #[error("precondition violated: max |v| = {max} exceeds bound {bound}")]
    BoundExceeded { max: f64, bound: f64 },

    #[error("unknown scheme `{0}`")]
    UnknownScheme(String),

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("invalid scheme: {0}")]
    InvalidScheme(String),

    #[error("duplicate gamma {0} in Richardson sequence")]
    DuplicateGamma(u32),

    #[error("flow failed in term {term}, stage {stage}: {source}")]
    Flow {
        term: usize,
        stage: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("non-finite value detected at step {step}")]
    NonFinite { step: usize },

    #[error("{0}")]
    Unsupported(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("energy undefined: {0}")]
    Energy(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
