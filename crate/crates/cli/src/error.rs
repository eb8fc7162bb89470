use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable or malformed config; `location` is `path:line:column`.
    #[error("{location}: {message}")]
    Config { location: String, message: String },

    /// Config parsed but describes something the simulator cannot run.
    #[error("invalid configuration: {0}")]
    Invalid(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } | CliError::Invalid(_) => 2,
            CliError::Invariant(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl From<teleport_core::Error> for CliError {
    fn from(e: teleport_core::Error) -> Self {
        match e {
            teleport_core::Error::InvariantViolation(m) => CliError::Invariant(m),
            other => CliError::Invalid(other.to_string()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        let invariant: CliError = teleport_core::Error::InvariantViolation("x".into()).into();
        assert_eq!(invariant.exit_code(), 3);
        let precondition: CliError = teleport_core::Error::Precondition("x".into()).into();
        assert_eq!(precondition.exit_code(), 2);
        let config = CliError::Config {
            location: "c.json:1:1".into(),
            message: "m".into(),
        };
        assert_eq!(config.exit_code(), 2);
        assert_eq!(config.to_string(), "c.json:1:1: m");
    }
}
