//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SepError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("assumption violated: {0}")]
    AssumptionViolated(String),

    #[error("ellipticity violated at (t={t}, a={a}): sigma={sigma} < epsilon={epsilon}")]
    Ellipticity { t: f64, a: f64, sigma: f64, epsilon: f64 },

    #[error("evaluation error at (t={t}, a={a}): {detail}")]
    Evaluation { t: f64, a: f64, detail: String },

    #[error("insufficient samples: {rows} rows for {basis} basis functions")]
    InsufficientSamples { rows: usize, basis: usize },

    #[error("regression failure: {0}")]
    Regression(String),

    #[error("mode error: {0}")]
    Mode(String),

    #[error("Picard iteration diverged at iteration {iteration}: {detail}")]
    Diverged { iteration: usize, detail: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("sample too small: {0} values (need at least 20)")]
    SampleTooSmall(usize),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SepError>;
