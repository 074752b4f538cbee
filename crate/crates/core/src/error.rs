use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error)]
pub enum IbseError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite value in {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("derivative order {order} exceeds kernel regularity C^{regularity}")]
    RegularityExceeded { order: usize, regularity: usize },

    #[error("normal vector is not unit length (|n| = {norm})")]
    NonUnitNormal { norm: f64 },

    #[error("length mismatch for {what}: expected {expected}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("degenerate boundary: {0}")]
    DegenerateBoundary(String),

    #[error("piecewise polynomial error: {0}")]
    Polynomial(String),

    #[error("Schur complement is numerically singular (pivot {pivot:.3e} at row {row}, condition estimate {kappa:.3e})")]
    Singular { row: usize, pivot: f64, kappa: f64 },

    #[error("factorization does not match the problem: {0}")]
    FactorizationMismatch(String),

    #[error("corrupt factorization file {path}: {reason}")]
    CorruptFile { path: PathBuf, reason: String },

    #[error("solution blew up at step {step} (t = {time}, max |u| = {max})")]
    BlowUp { step: usize, time: f64, max: f64 },

    #[error("missing analytic solution for problem `{0}`")]
    NoAnalyticSolution(String),

    #[error("grids are not nested: {0}")]
    NotNested(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, IbseError>;
