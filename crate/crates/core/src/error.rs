use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("value {value} outside the profile range [{lo}, {hi}]")]
    Range { value: f64, lo: f64, hi: f64 },

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("construction failed: {0}")]
    Construction(String),

    #[error("no convergence after {sweeps} sweeps (residual {residual:e}, tolerance {tol:e})")]
    NonConvergence {
        sweeps: usize,
        residual: f64,
        tol: f64,
    },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
