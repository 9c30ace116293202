use std::path::PathBuf;

use thiserror::Error;

use crate::model::CoincidenceOutcome;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A probability in the Fisher sum vanished, so the information diverges.
    #[error("singular probability point: outcome {outcome} has zero probability")]
    SingularProbability { outcome: CoincidenceOutcome },

    /// Invalid source/efficiency/experiment configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Counts required as a denominator were zero.
    #[error("empty statistics: {0}")]
    EmptyStatistics(String),

    #[error("fit did not converge after {iterations} iterations (chi2 = {chi2:.6e}): {message}")]
    Fit {
        message: String,
        iterations: usize,
        chi2: f64,
        residuals: Vec<f64>,
    },

    #[error("count overflow in {0}")]
    Overflow(&'static str),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
