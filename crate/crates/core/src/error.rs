use thiserror::Error;

/// Errors raised by the spline, projection and convergence routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid knot program: {0}")]
    InvalidProgram(String),

    #[error("knot {value} occurs {count} times among {n} knots, at most {max} allowed")]
    Multiplicity {
        value: f64,
        count: usize,
        n: usize,
        max: usize,
    },

    #[error("knot program yields only {available} knots, {requested} requested")]
    Exhausted { available: usize, requested: usize },

    #[error("knot program exhausted floating-point resolution at knot {index} (value {value})")]
    Resolution { index: usize, value: f64 },

    #[error("invalid knot vector: {0}")]
    InvalidKnots(String),

    #[error("spline order must be at least 1")]
    InvalidOrder,

    #[error("point {0} lies outside the admissible range")]
    Domain(f64),

    #[error("spline spaces are not nested: {0}")]
    NotNested(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("Cholesky factorization failed at pivot {index} (value {pivot:e})")]
    Factorization { index: usize, pivot: f64 },

    #[error("space of dimension {dim} has no off-diagonal offsets to fit for order {order}")]
    InsufficientSize { dim: usize, order: usize },

    #[error("unsupported accumulation structure: {0}")]
    UnsupportedAccumulation(String),

    #[error("martingale consistency defect {defect:e} between n = {m} and n = {n}")]
    Consistency { m: usize, n: usize, defect: f64 },

    #[error("functional does not stabilize: defect {defect:e} between n = {m} and n = {n}")]
    Stabilization { m: usize, n: usize, defect: f64 },

    #[error("invalid schedule: {0}")]
    Schedule(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
