use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An enumeration or window would exceed the configured guard.
    #[error("capacity exceeded: {what} needs {needed}, limit is {limit}")]
    Capacity {
        what: String,
        needed: u128,
        limit: u128,
    },

    /// Two objects that must live on the same window/alphabet do not.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A finite frame is too small for the requested quantity to be determined.
    #[error("ambiguous truncation: {0}")]
    Ambiguity(String),

    /// Input outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("optimization did not converge after {iterations} iterations (best {best}, gap {gap})")]
    Optimization {
        best: f64,
        gap: f64,
        iterations: usize,
    },

    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub(crate) fn capacity(what: impl Into<String>, needed: u128, limit: u128) -> Self {
        Error::Capacity {
            what: what.into(),
            needed,
            limit,
        }
    }

    /// Capacity and ambiguity errors both mean "the finite computation is out of reach".
    pub fn is_resource_error(&self) -> bool {
        matches!(self, Error::Capacity { .. } | Error::Ambiguity(_))
    }
}
