use std::fmt;

/// Process exit codes.
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_BAD_CONFIG: u8 = 2;
pub const EXIT_BAD_INPUT: u8 = 3;
pub const EXIT_DIVERGED: u8 = 4;
pub const EXIT_UNREACHABLE: u8 = 5;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        CliError { code, message: message.into() }
    }

    pub fn config(message: impl fmt::Display) -> Self {
        CliError::new(EXIT_BAD_CONFIG, message.to_string())
    }

    pub fn input(message: impl fmt::Display) -> Self {
        CliError::new(EXIT_BAD_INPUT, message.to_string())
    }

    /// Prefixes the message with what was being done.
    pub fn context(self, what: impl fmt::Display) -> Self {
        CliError { code: self.code, message: format!("{what}: {}", self.message) }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<smoothcert::Error> for CliError {
    fn from(e: smoothcert::Error) -> Self {
        use smoothcert::Error as E;
        let code = match &e {
            E::Domain(_) | E::InvalidSpec(_) | E::InvalidConfig(_) => EXIT_BAD_CONFIG,
            E::Parse(_) | E::Json(_) | E::Empty(_) | E::DimensionMismatch { .. } | E::InvalidClass { .. } | E::Io(_) => {
                EXIT_BAD_INPUT
            }
            E::Divergence { .. } => EXIT_DIVERGED,
            E::UnreachableTarget { .. } => EXIT_UNREACHABLE,
            _ => EXIT_FAILURE,
        };
        CliError::new(code, e.to_string())
    }
}

/// Failures while writing outputs.
impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::new(EXIT_FAILURE, e.to_string())
    }
}

/// Helpers for attaching an exit code to foreign errors.
pub trait OrExit<T> {
    fn or_config(self, what: &str) -> CliResult<T>;
    fn or_input(self, what: &str) -> CliResult<T>;
}

impl<T, E: fmt::Display> OrExit<T> for Result<T, E> {
    fn or_config(self, what: &str) -> CliResult<T> {
        self.map_err(|e| CliError::config(format!("{what}: {e}")))
    }

    fn or_input(self, what: &str) -> CliResult<T> {
        self.map_err(|e| CliError::input(format!("{what}: {e}")))
    }
}
