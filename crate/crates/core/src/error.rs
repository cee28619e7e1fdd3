use thiserror::Error;

/// Errors raised anywhere in the shape-optimization pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain an operation is defined on.
    #[error("domain error: {0}")]
    Domain(String),

    /// A thickness value or coefficient is not strictly positive.
    #[error("degenerate shape: thickness coefficient {index} is {value} (must be > 0)")]
    DegenerateShape { index: usize, value: f64 },

    /// Mismatched dimensions or otherwise violated API contract.
    #[error("contract violation: {0}")]
    Contract(String),

    /// The boundary-value problem is not well posed (e.g. no Dirichlet support).
    #[error("constraint error: {0}")]
    Constraint(String),

    /// Factorization failure, non-finite values, exhausted line search.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Invalid or incomplete configuration.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
