use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {what} has length {found}, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("discrepancy bracket failure: {0}")]
    BracketFailure(String),

    #[error("source condition not satisfiable: relative residual {residual:.3e} exceeds {limit:.1e}")]
    SourceCondition { residual: f64, limit: f64 },

    #[error("solver did not converge: {0}")]
    SolverFailure(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            found,
        })
    }
}
