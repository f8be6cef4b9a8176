use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("matrix is not positive definite (smallest eigenvalue {min_eigenvalue:e}, largest {max_eigenvalue:e})")]
    NonPositiveDefinite {
        min_eigenvalue: f64,
        max_eigenvalue: f64,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("unsupported loss/penalty/algorithm combination: {0}")]
    UnsupportedPair(String),

    #[error("solver did not converge after {iterations} iterations (KKT gap {kkt_gap:e})")]
    NotConverged { kkt_gap: f64, iterations: usize },

    #[error("SVD failed: {0}")]
    SvdFailure(String),

    #[error("no closed-form Jacobian factors for {0}; use the Monte Carlo route")]
    NoClosedForm(String),

    #[error("field evaluation failed: {0}")]
    FieldEvaluation(String),

    #[error("degenerate multiplicative factor: {0}")]
    DegenerateFactor(String),

    #[error("invalid configuration field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Whether the error comes from bad user input rather than a numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::DimensionMismatch { .. }
                | Error::NonFinite(_)
                | Error::InvalidParameter { .. }
                | Error::UnsupportedPair(_)
                | Error::Config { .. }
                | Error::Json(_)
                | Error::Csv(_)
        )
    }
}
