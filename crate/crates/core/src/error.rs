use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A domain invariant does not hold for the named field.
    #[error("invalid value for `{field}`: {reason}")]
    Validation { field: String, reason: String },

    #[error("singular geometry: {0}")]
    SingularGeometry(String),

    /// The SCA anchor point violates its own linearized distance bounds.
    #[error("infeasible SCA anchor: {0}")]
    InfeasibleAnchor(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unknown scenario keys: {}", .0.join(", "))]
    UnknownKeys(Vec<String>),

    /// A recomputed constraint check failed on a returned solution.
    #[error("invariant breach: {0}")]
    InvariantBreach(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn validation(field: &str, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.to_string(),
            reason: reason.into(),
        }
    }
}
