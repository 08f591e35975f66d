use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("{operation} is not defined for {family}")]
    Unsupported { operation: &'static str, family: String },

    #[error("estimator expects {expected} samples, got {got}")]
    SampleSize { expected: usize, got: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("samples {0:?} are not a translate of the atom set")]
    InconsistentSamples(Vec<f64>),

    #[error("enumeration of {what} needs {size} cases, limit is {limit}")]
    EnumerationLimit { what: &'static str, size: u128, limit: u128 },

    #[error("mixture needs at least one component")]
    EmptyMixture,

    #[error("shift-invariant estimator `{label}` disagrees across θ: {detail}")]
    InvarianceViolated { label: String, detail: String },

    #[error("report serialization failed: {0}")]
    Serialization(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}
