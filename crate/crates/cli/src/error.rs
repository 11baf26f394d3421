use std::fmt;

/// Failures that end a run, each with its exit code.
#[derive(Debug)]
pub enum CliError {
    /// The configuration violates the schema (exit 3).
    Schema { path: String, message: String },
    /// A computation or file operation failed (exit 1).
    Compute(String),
}

impl CliError {
    pub fn schema(path: &str, message: impl Into<String>) -> Self {
        CliError::Schema { path: path.to_string(), message: message.into() }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema { .. } => 3,
            CliError::Compute(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Schema { path, message } if path.is_empty() => write!(f, "schema violation: {message}"),
            CliError::Schema { path, message } => write!(f, "schema violation at `{path}`: {message}"),
            CliError::Compute(m) => write!(f, "computation failed: {m}"),
        }
    }
}

impl From<inls_core::Error> for CliError {
    fn from(e: inls_core::Error) -> Self {
        CliError::Compute(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Compute(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Compute(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Compute(e.to_string())
    }
}
