use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by dataset ingestion, training, and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("dataset has no {class} samples")]
    EmptyClass { class: &'static str },

    #[error("invalid synthesis spec: {0}")]
    InvalidSpec(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("solver did not converge (last objective {last_objective})")]
    Convergence { last_objective: f64 },

    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),

    #[error("ensemble contains no experts")]
    EmptyEnsemble,

    #[error("round {round}: {source}")]
    Round {
        round: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Wraps an error with the mining round it occurred in.
    pub fn in_round(self, round: usize) -> Self {
        Error::Round {
            round,
            source: Box::new(self),
        }
    }
}
