use thiserror::Error;

/// Errors produced across the library.
#[derive(Debug, Error)]
pub enum HawkesError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    #[error("numeric failure: {what} (achieved tolerance {achieved:e}, requested {requested:e})")]
    Numeric {
        what: String,
        achieved: f64,
        requested: f64,
    },

    #[error("explosion guard tripped: {count} events exceeds cap {cap} (check eta < 1 and the model spec)")]
    Explosion { count: usize, cap: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("fit did not converge: {0}")]
    NonConvergence(String),

    #[error("ill-conditioned information matrix (condition number {0:.3e})")]
    IllConditioned(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, HawkesError>;
