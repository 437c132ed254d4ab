use num_complex::Complex64;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("states or operators live on different grids")]
    GridMismatch,

    #[error("symbol not evaluable at midpoint {point:?}")]
    SymbolNotEvaluable { point: Vec<f64> },

    #[error("power iteration did not converge after {iterations} iterations (estimate {estimate:e})")]
    NormNotConverged {
        iterations: usize,
        estimate: f64,
        last_iterate: Vec<Complex64>,
    },

    #[error("{operation}: {message}")]
    Precondition {
        operation: &'static str,
        message: String,
    },

    #[error("decay fit needs at least 3 points above the floor, got {surviving}")]
    InsufficientPoints { surviving: usize },

    #[error("eigensolver: {0}")]
    Eigen(String),

    #[error("config validation failed:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),

    #[error("{0}")]
    Config(String),

    #[error("experiment {experiment}: {source}")]
    Run {
        experiment: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn pre(operation: &'static str, message: impl Into<String>) -> Self {
        Error::Precondition {
            operation,
            message: message.into(),
        }
    }
}
