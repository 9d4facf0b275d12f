use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("site {site}: {what}")]
    Site { site: usize, what: String },

    #[error("site index {site} out of range for a chain of {n_sites}")]
    SiteIndex { site: usize, n_sites: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    Domain(String),

    #[error("operator is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("{what} did not converge (residual {residual:e})")]
    NoConvergence { what: String, residual: f64 },

    #[error("integration failed at t = {time:e} s: {reason}")]
    Integration { time: f64, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
