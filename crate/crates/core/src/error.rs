use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BachError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("geometry `{0}` is not supported by {1}")]
    UnsupportedGeometry(&'static str, &'static str),
    #[error("tensor is not diagonal: off-diagonal {off:e} exceeds tolerance {tol:e}")]
    NotDiagonal { off: f64, tol: f64 },
    #[error("arity mismatch: {name} takes {expected} arguments, got {got}")]
    ArityMismatch {
        name: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("no closed form for {0}")]
    NotClosedForm(String),
    #[error("unclassified: {0}")]
    Unclassified(String),
    #[error("indeterminate classification: margin {margin:e} to the stable manifold is within tolerance {tol:e}")]
    Indeterminate { margin: f64, tol: f64 },
    #[error("bisection failure: {0}")]
    BisectionFailure(String),
    #[error("integration failed: {0}")]
    Integration(String),
}

pub type Result<T> = std::result::Result<T, BachError>;
