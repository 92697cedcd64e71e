//! Error type shared by every module of the crate.

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong when building problems, running solvers or
/// assembling confidence intervals.
#[derive(Debug, Error)]
pub enum Error {
    /// A vector did not have the dimension the operation expects.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    /// A query point lies outside the feasible set beyond the tolerance.
    #[error("point outside the feasible set (constraint residual {residual:.3e})")]
    Domain { residual: f64 },

    /// A parameter is out of its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A constant required by a formula is absent from the constant sheet.
    #[error("missing constant: {0}")]
    MissingConstant(&'static str),

    /// The requested combination (setup and set, method and run) is not supported.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A confidence interval was requested from a run it does not apply to.
    #[error("invalid method: {0}")]
    InvalidMethod(String),

    /// A numerical routine failed in a way that should not happen for valid input.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// An iterative reference solver hit its iteration cap.
    #[error("no convergence after {iterations} iterations (last gap {gap:.3e})")]
    Convergence { iterations: usize, gap: f64 },

    /// The oracle budget cannot accommodate even the first multistep stage.
    #[error("budget of {budget} oracle calls is below the first stage size {required}")]
    BudgetTooSmall { budget: usize, required: usize },

    /// A risk-measure model violates one of its standing assumptions.
    #[error("assumption {assumption} violated: {detail}")]
    Assumption { assumption: &'static str, detail: String },

    /// A linear program did not reach an optimal solution.
    #[error("linear program ended with status {status}{}", context.as_deref().map(|c| format!(" ({c})")).unwrap_or_default())]
    Lp { status: String, context: Option<String> },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn unsupported(msg: impl Into<String>) -> Self {
        Error::Unsupported(msg.into())
    }
}

/// Checks that `got` equals `expected`.
pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}
