use thiserror::Error;

/// Errors raised by the library and the batch runner.
#[derive(Debug, Error)]
pub enum Error {
    #[error("inverse of {0} has no closed form")]
    UnsupportedInverse(String),

    #[error("bad weights: {0}")]
    BadWeights(String),

    #[error("bad measure: {0}")]
    BadMeasure(String),

    /// The exact convolution power would have this many branches.
    #[error("exact enumeration needs {branches} branches, budget is {budget}")]
    BudgetExceeded { branches: u128, budget: u128 },

    #[error("singular value ratio {ratio} too close to 1, no contracted direction")]
    DegenerateGap { ratio: f64 },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unknown key `{0}`")]
    UnknownKey(String),

    #[error("`{key}`: {message}")]
    Range { key: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable module-qualified code, used in CLI diagnostics.
    pub fn code(&self) -> &'static str {
        match self {
            Error::UnsupportedInverse(_) => "torus.unsupported_inverse",
            Error::BadWeights(_) => "measure.bad_weights",
            Error::BadMeasure(_) => "measure.bad_measure",
            Error::BudgetExceeded { .. } => "measure.budget_exceeded",
            Error::DegenerateGap { .. } => "spectrum.degenerate_gap",
            Error::Parse { .. } => "config.parse",
            Error::UnknownKey(_) => "config.unknown_key",
            Error::Range { .. } => "config.range",
            Error::Io(_) => "runner.io",
            Error::Json(_) => "runner.json",
            Error::Csv(_) => "runner.csv",
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn range(key: &str, message: impl Into<String>) -> Self {
        Error::Range {
            key: key.to_string(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
