use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A capacity or conservation constraint does not hold.
    #[error("constraint violated: {0}")]
    ConstraintViolation(String),

    /// A configuration field is missing, malformed or out of range.
    #[error("config error in `{field}`: {message}")]
    Parse { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization failed: {0}")]
    Serialize(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn parse(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            field: field.into(),
            message: message.into(),
        }
    }
}

/// Rejects NaN, infinities and negative values.
pub(crate) fn check_rate(name: &str, value: f64) -> Result<()> {
    if !value.is_finite() {
        return Err(Error::invalid(format!(
            "{name} must be finite, got {value}"
        )));
    }
    if value < 0.0 {
        return Err(Error::invalid(format!(
            "{name} must be nonnegative, got {value}"
        )));
    }
    Ok(())
}

pub(crate) fn check_positive(name: &str, value: f64) -> Result<()> {
    check_rate(name, value)?;
    if value == 0.0 {
        return Err(Error::invalid(format!("{name} must be positive")));
    }
    Ok(())
}
