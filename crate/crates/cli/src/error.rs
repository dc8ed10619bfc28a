use std::fmt;
use std::process::ExitCode;

/// A command failure and the exit status it maps to.
#[derive(Debug)]
pub enum Failure {
    /// Bad arguments, unreadable or invalid config, I/O errors. Exit 1.
    Usage(String),
    /// The network cannot be aligned. Exit 2.
    Infeasible(String),
}

impl Failure {
    pub fn usage(msg: impl Into<String>) -> Self {
        Failure::Usage(msg.into())
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            Failure::Usage(_) => ExitCode::from(1),
            Failure::Infeasible(_) => ExitCode::from(2),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "error: {m}"),
            Failure::Infeasible(m) => write!(f, "infeasible network:\n{m}"),
        }
    }
}

impl From<compia::simulator::SimError> for Failure {
    fn from(e: compia::simulator::SimError) -> Self {
        match e {
            compia::simulator::SimError::Infeasible(r) => Failure::Infeasible(r.to_string()),
            other => Failure::Usage(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}
