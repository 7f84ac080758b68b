use std::fmt;

use chainpulse::classify::ClassifyError;
use chainpulse::explore::ExploreError;
use chainpulse::forecast::ForecastError;
use chainpulse::ingest::{CollectError, IngestError};
use chainpulse::simulate::SimError;

use crate::plot::PlotError;

/// Machine-readable error class, printed as `error[<code>]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCode {
    Usage,
    Io,
    Input,
    Precondition,
    Rpc,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::Usage => "usage",
            ErrorCode::Io => "io",
            ErrorCode::Input => "input",
            ErrorCode::Precondition => "precondition",
            ErrorCode::Rpc => "rpc",
        }
    }

    pub fn exit_status(self) -> i32 {
        match self {
            ErrorCode::Usage => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: ErrorCode,
    pub message: String,
}

impl CliError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::Usage, message)
    }

    pub fn precondition(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::Precondition, message)
    }

    pub fn input(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::Input, message)
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::Io, message)
    }

    /// Prefixes the message with where the failure happened.
    pub fn context(mut self, what: &str) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }
}

impl fmt::Display for CliError {
    /// Always a single line so callers can split on the first `:`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let flat = self.message.split_whitespace().collect::<Vec<_>>().join(" ");
        write!(f, "error[{}]: {flat}", self.code.as_str())
    }
}

impl std::error::Error for CliError {}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        let code = match e {
            IngestError::Io { .. } => ErrorCode::Io,
            IngestError::InvalidSplit(_) | IngestError::EmptySeries => ErrorCode::Precondition,
            _ => ErrorCode::Input,
        };
        Self::new(code, e.to_string())
    }
}

impl From<CollectError> for CliError {
    fn from(e: CollectError) -> Self {
        let code = match e {
            CollectError::InvalidRange { .. } | CollectError::InvalidPollInterval => ErrorCode::Precondition,
            _ => ErrorCode::Rpc,
        };
        Self::new(code, e.to_string())
    }
}

macro_rules! precondition_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                Self::precondition(e.to_string())
            }
        }
    )*};
}

precondition_from!(SimError, ExploreError, ForecastError, ClassifyError, PlotError);

pub type CliResult<T> = Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_is_one_line() {
        let e = CliError::input("bad\nrow\n  7");
        assert_eq!(e.to_string(), "error[input]: bad row 7");
        assert_eq!(CliError::usage("x").code.exit_status(), 2);
        assert_eq!(CliError::io("x").code.exit_status(), 1);
    }

    #[test]
    fn module_errors_map_to_codes() {
        let e: CliError = IngestError::EmptySeries.into();
        assert_eq!(e.code, ErrorCode::Precondition);
        let e: CliError = SimError::NoPools.into();
        assert_eq!(e.code, ErrorCode::Precondition);
        assert!(e.message.contains("pool"));
        let e: CliError = CollectError::BeyondTip { requested: 9, tip: 3 }.into();
        assert_eq!(e.code, ErrorCode::Rpc);
    }
}
