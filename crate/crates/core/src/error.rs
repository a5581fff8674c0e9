use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("coefficient table must start with log a_0 = 0, found {0}")]
    BadNormalization(f64),

    #[error("log-coefficients are not concave: violation at n = {index} (second difference {second_difference:e})")]
    NotLogConcave { index: usize, second_difference: f64 },

    #[error("support limit n = {limit} exhausted while {context}")]
    SupportExhausted { limit: usize, context: &'static str },

    #[error("degenerate profile: log mu(r) = 0, the band partition of the tail is undefined")]
    DegenerateProfile,

    #[error("not applicable: {0}")]
    Inapplicable(String),

    #[error("no weighted successes among {0} importance samples")]
    NoSuccesses(usize),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
