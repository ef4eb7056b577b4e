use std::io;

use thiserror::Error;

use crate::optim::RunRecord;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: expected {expected}, got {got}")]
    Dimension {
        op: &'static str,
        expected: String,
        got: String,
    },

    #[error("non-finite entry {value} at ({row}, {col})")]
    NonFinite { row: usize, col: usize, value: f64 },

    #[error(
        "matrix is not positive definite: smallest eigenvalue {min_eig:e} <= tolerance {tol:e}"
    )]
    NotPositiveDefinite { min_eig: f64, tol: f64 },

    #[error(
        "rank deficient {what}: smallest eigenvalue {min_eig:e} relative to largest {max_eig:e}"
    )]
    RankDeficient {
        what: &'static str,
        min_eig: f64,
        max_eig: f64,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("missing capability: {0}")]
    Capability(&'static str),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("numerical abort at iteration {iteration}: {reason}")]
    Divergence {
        iteration: usize,
        reason: String,
        partial: Box<RunRecord>,
    },

    #[error("{path}: line {line}, column {column}: {msg}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        msg: String,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn dim(op: &'static str, expected: impl ToString, got: impl ToString) -> Self {
        Error::Dimension {
            op,
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }
}
