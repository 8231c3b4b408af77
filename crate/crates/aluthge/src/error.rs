use thiserror::Error;

/// Everything that can go wrong in this crate.
///
/// The CLI maps these onto exit codes: invalid input and documents are usage
/// errors (2), nonconvergence where convergence was asserted is 1, and
/// genuine numerical breakdowns (backend failures, backend disagreement,
/// non-separating spectra) are 3.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix has non-finite entries")]
    NonFinite,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("matrix is singular or nearly singular: {0}")]
    NearSingular(String),

    #[error("spectrum escapes the admissible region: {0}")]
    SpectrumEscape(String),

    #[error("projector backends disagree by {difference:.3e} (limit {limit:.3e})")]
    BackendDisagreement { difference: f64, limit: f64 },

    #[error("operator spectrum does not separate: {0}")]
    NoSeparation(String),

    #[error("projection system is not orthogonal (defect {0:.3e})")]
    NotOrthogonal(f64),

    #[error("not enough usable data: {0}")]
    InsufficientData(String),

    #[error("did not converge within {max_iter} iterations (last step size {last_step:.3e})")]
    NotConverged { max_iter: usize, last_step: f64 },

    #[error("linear algebra backend failure: {0}")]
    Backend(String),

    #[error("invalid document: {0}")]
    InvalidDocument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Backend(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::InvalidDocument(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
