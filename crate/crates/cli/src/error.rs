use std::fmt;

/// Exit status for bad input (parse or validation).
pub const EXIT_VALIDATION: i32 = 2;
/// Exit status for numerical failures and hard gates.
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Parse(String),
    Validation(String),
    Io(String),
    Numerical(String),
    /// A validity gate failed hard.
    Gate(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) | CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Io(_) | CliError::Numerical(_) | CliError::Gate(_) => EXIT_NUMERICAL,
        }
    }

    pub fn context(self, what: &str) -> Self {
        let wrap = |m: String| format!("{what}: {m}");
        match self {
            CliError::Parse(m) => CliError::Parse(wrap(m)),
            CliError::Validation(m) => CliError::Validation(wrap(m)),
            CliError::Io(m) => CliError::Io(wrap(m)),
            CliError::Numerical(m) => CliError::Numerical(wrap(m)),
            CliError::Gate(m) => CliError::Gate(wrap(m)),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Parse(m) => write!(f, "parse error: {m}"),
            CliError::Validation(m) => write!(f, "invalid scenario: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Gate(m) => write!(f, "validity gate failed: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<bundlesim::Error> for CliError {
    fn from(e: bundlesim::Error) -> Self {
        use bundlesim::Error as E;
        match e {
            E::InvalidParams(_) | E::DegenerateCoefficient { .. } | E::NegativeCarrier { .. } => {
                CliError::Validation(e.to_string())
            }
            E::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}
