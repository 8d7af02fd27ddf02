use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("quadrature did not reach tolerance: estimate {value:e}, error {achieved:e} > requested {requested:e}")]
    Quadrature {
        value: f64,
        achieved: f64,
        requested: f64,
    },

    #[error("oscillatory quadrature did not converge after {terms} terms (last partial sums {partial:?})")]
    Oscillatory { terms: usize, partial: Vec<f64> },

    #[error("no sign change of the energy difference on [{lo}, {hi}]")]
    BracketNotFound { lo: f64, hi: f64 },

    #[error("grid: {0}")]
    Grid(String),

    #[error("boundary values of the initial field exceed tolerance ({max:e})")]
    BoundaryViolation { max: f64 },

    #[error("simulation diverged at step {step}")]
    Diverged { step: usize },

    #[error("ratio b/a undefined at u = {u}")]
    UndefinedRatio { u: f64 },

    #[error("insufficient lags for a fit: {0}")]
    InsufficientLags(String),

    #[error("config: {0}")]
    Config(String),

    #[error("decode: {0}")]
    Decode(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
