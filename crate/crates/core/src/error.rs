use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument left the domain on which the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// Inconsistent vector or matrix sizes, or an instance over an enumeration budget.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// The fixed-point residual has no sign change on the search bracket.
    #[error("no root on ({lo}, {hi}): residual {r_lo:e} .. {r_hi:e}")]
    NoRoot { lo: f64, hi: f64, r_lo: f64, r_hi: f64 },

    /// A root was bracketed but the residual at the returned point is too large.
    #[error("residual {residual:e} at theta = {theta} exceeds certification bound {bound:e}")]
    Uncertified { theta: f64, residual: f64, bound: f64 },

    /// Solver could not produce a certified answer at the requested tolerance.
    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    /// A linear program that should have had a solution was infeasible.
    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("unbounded: {0}")]
    Unbounded(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
