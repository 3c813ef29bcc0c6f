use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("model `{model}` requires parameter `{param}`")]
    MissingParam { model: String, param: String },

    #[error("model `{model}`: invalid parameter `{param}` = {value} ({reason})")]
    InvalidParam {
        model: String,
        param: String,
        value: f64,
        reason: String,
    },

    #[error("argument u = {u} outside the guarded domain [0, {limit}]")]
    Domain { u: f64, limit: f64 },

    #[error("{what} is not finite at u = {u}")]
    NonFinite { what: &'static str, u: f64 },

    #[error("singular matrix: pivot {pivot:e} at row {row}")]
    Singular { row: usize, pivot: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("solution left the positive regime (lambda = {0})")]
    NegativeLambda(f64),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("continuation failed at p = {p}: {reason}")]
    TraceFailed { p: f64, reason: String },

    #[error("model has an infinite singularity radius")]
    InfiniteRadius,

    #[error("curve did not reach the tail region (last p = {p_last}, required {required})")]
    TailNotReached { p_last: f64, required: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("eigen-iteration did not converge after {0} iterations")]
    EigenNoConvergence(usize),

    #[error("format error: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
