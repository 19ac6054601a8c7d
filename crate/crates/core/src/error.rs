use std::fmt;

/// Errors surfaced by sequence construction, discrepancy scans, chain
/// runs and data loading.
#[derive(Debug)]
pub enum Error {
    /// A precondition on an argument was violated.
    Domain(String),
    /// Input data failed validation (row counts, stochasticity, ...).
    Validation(String),
    /// An exact discrepancy scan would exceed the corner-count budget.
    BudgetExceeded { required: u128, budget: u128 },
    /// IO failure, annotated with the offending path.
    Io { path: String, source: std::io::Error },
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::Validation(msg) => write!(f, "validation error: {msg}"),
            Error::BudgetExceeded { required, budget } => write!(
                f,
                "work budget exceeded: scan needs ~{required} corner operations, budget is {budget}"
            ),
            Error::Io { path, source } => write!(f, "{path}: {source}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
