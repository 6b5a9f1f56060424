use thiserror::Error;

/// Snapshot of an unconverged graphical lasso fit, stored in `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialFit {
    pub dim: usize,
    /// Row-major precision estimate at the last sweep.
    pub theta: Vec<f64>,
    /// Row-major working covariance at the last sweep.
    pub w: Vec<f64>,
    pub iterations: usize,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix is not positive semi-definite (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveSemiDefinite { min_eigenvalue: f64 },

    #[error("matrix is not positive definite (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("matrix is singular (min eigenvalue {min_eigenvalue:e})")]
    SingularMatrix { min_eigenvalue: f64 },

    #[error("{context} did not converge after {iterations} iterations")]
    ConvergenceFailure {
        context: String,
        iterations: usize,
        partial: Option<Box<PartialFit>>,
    },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("network generation failed: {0}")]
    GenerationFailure(String),

    #[error("every grid point failed ({} failures)", failures.len())]
    SelectionFailure { failures: Vec<GridFailure> },

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),

    #[error("input error at row {row}, column {col}: {message}")]
    Input {
        row: usize,
        col: usize,
        message: String,
    },

    #[error("data span of {span_days} days is shorter than one window ({window_days} days)")]
    Span { span_days: i64, window_days: i64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// One failed `(lambda, alpha)` evaluation in a grid search.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFailure {
    pub lambda: f64,
    pub alpha: f64,
    pub message: String,
}

impl Error {
    /// Stable machine-readable tag, used in the CLI's JSON error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "InvalidInput",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::NotPositiveSemiDefinite { .. } => "NotPositiveSemiDefinite",
            Error::NotPositiveDefinite { .. } => "NotPositiveDefinite",
            Error::SingularMatrix { .. } => "SingularMatrix",
            Error::ConvergenceFailure { .. } => "ConvergenceFailure",
            Error::NumericalFailure(_) => "NumericalFailure",
            Error::GenerationFailure(_) => "GenerationFailure",
            Error::SelectionFailure { .. } => "SelectionFailure",
            Error::InvalidSplit(_) => "InvalidSplit",
            Error::UnsupportedDimension(_) => "UnsupportedDimension",
            Error::Input { .. } => "InputError",
            Error::Span { .. } => "SpanError",
            Error::Config(_) => "ConfigError",
            Error::Io(_) => "IoError",
            Error::Csv(_) => "CsvError",
            Error::Json(_) => "JsonError",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
