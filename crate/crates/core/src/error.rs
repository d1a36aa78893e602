use thiserror::Error;

/// Errors raised by the numerical engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum HamError {
    /// An argument lies outside the domain where the formula is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A brute-force or QMC routine was asked for an order it does not support.
    #[error("unsupported order {order}: {reason}")]
    UnsupportedOrder { order: usize, reason: String },

    /// Quadrature failed to reach its tolerance.
    #[error("numeric error: {what} (estimate {estimate:e}, error {error:e}, {evals} evaluations)")]
    Numeric {
        what: String,
        estimate: f64,
        error: f64,
        evals: usize,
    },

    /// Grid or run configuration is inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    /// Circulant embedding produced a significantly negative eigenvalue.
    #[error("noise synthesis error: eigenvalue {eigenvalue:e} below tolerance (max {max:e})")]
    Synthesis { eigenvalue: f64, max: f64 },

    /// Not enough statistical precision to produce a trustworthy answer.
    #[error("insufficient precision: {0}")]
    Precision(String),

    /// A mathematical invariant was violated at runtime.
    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for HamError {
    fn from(e: std::io::Error) -> Self {
        HamError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, HamError>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(HamError::Domain(msg.into()))
}
