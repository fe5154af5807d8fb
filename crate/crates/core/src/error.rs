use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("tridiagonal elimination hit a pivot of magnitude {pivot:e} at row {row}")]
    ZeroPivot { row: usize, pivot: f64 },

    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
    },

    #[error("solution sup norm {sup:e} exceeded the cap {cap:e} at time slice {slice}")]
    InstabilityGuard { slice: usize, sup: f64, cap: f64 },

    #[error("control is nonzero outside the control region at node {node}, slice {slice}")]
    ControlOutsideOmega { node: usize, slice: usize },

    #[error("Gramian has no retained eigenvalues")]
    EmptySpectrum,

    #[error("null control residual {residual:e} above target {target:e} after {retries} retries")]
    NullControlFailure {
        residual: f64,
        target: f64,
        retries: usize,
    },

    #[error("truncation error {achieved:e} misses budget {budget:e} even with all {n_max} bands")]
    BudgetExceeded {
        achieved: f64,
        budget: f64,
        n_max: usize,
    },

    #[error("nonlinearity returned a non-finite value at s = {s}")]
    NonFiniteValue { s: f64 },

    #[error("state sup norm {sup:e} exceeded the blow-up cap {cap:e} (sigma = {sigma})")]
    BlowUp { sigma: f64, sup: f64, cap: f64 },

    #[error("not enough data to fit: {0}")]
    InsufficientData(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation failed:\n  - {}", .0.join("\n  - "))]
    Validation(Vec<String>),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Errors caused by user input rather than by the numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Parse(_) | Error::Validation(_) | Error::Io { .. } | Error::Csv(_)
        )
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
