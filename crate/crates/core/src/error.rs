use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid migration matrix: negative off-diagonal entry A({row},{col}) = {value}")]
    NegativeOffDiagonal { row: usize, col: usize, value: f64 },

    #[error("invalid migration matrix: {0}")]
    Matrix(String),

    #[error(
        "quadrature did not converge on [{a}, {b}]: estimate {estimate}, error {error} after {intervals} intervals"
    )]
    Quadrature {
        a: f64,
        b: f64,
        estimate: f64,
        error: f64,
        intervals: usize,
    },

    #[error("numerical error at t = {time}: {message}")]
    Numerical { time: f64, message: String },

    #[error("path blew up at t = {time}: coordinate {value} exceeds bound {bound}")]
    BlowUp { time: f64, value: f64, bound: f64 },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("degenerate variance: need at least 2 replicates, got {0}")]
    DegenerateVariance(usize),

    #[error("config error at {location}: {message}")]
    Config { location: String, message: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
