use std::fmt;

use annoteval_core::bootstrap::BootstrapError;
use annoteval_core::metrics::MetricsError;
use annoteval_core::{CorpusError, TypologyError};
use annoteval_llm::LlmError;

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    Validation = 1,
    Provider = 2,
    Usage = 3,
}

/// An error ready to be printed as `ERROR\t<kind>\t<message>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub kind: String,
    pub message: String,
    pub exit: Exit,
}

impl CliError {
    pub fn new(kind: &str, message: impl Into<String>, exit: Exit) -> CliError {
        CliError {
            kind: kind.to_string(),
            message: message.into(),
            exit,
        }
    }

    pub fn usage(message: impl Into<String>) -> CliError {
        CliError::new("UsageError", message, Exit::Usage)
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> CliError {
        CliError::new(
            "IoError",
            format!("{}: {e}", path.display()),
            Exit::Validation,
        )
    }

    /// The diagnostic line. Tabs and newlines in the message are flattened so
    /// the line always has exactly three fields.
    pub fn line(&self) -> String {
        diagnostic_line(&self.kind, &self.message)
    }
}

pub fn diagnostic_line(kind: &str, message: &str) -> String {
    let flat: String = message
        .chars()
        .map(|c| {
            if c == '\t' || c == '\n' || c == '\r' {
                ' '
            } else {
                c
            }
        })
        .collect();
    format!("ERROR\t{kind}\t{flat}")
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind, self.message)
    }
}

impl std::error::Error for CliError {}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> CliError {
        CliError::new(e.kind(), e.to_string(), Exit::Validation)
    }
}

impl From<TypologyError> for CliError {
    fn from(e: TypologyError) -> CliError {
        CliError::new("TypologyError", e.to_string(), Exit::Validation)
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> CliError {
        match e {
            MetricsError::DocSetMismatch { .. } => {
                CliError::new("DocSetMismatch", e.to_string(), Exit::Validation)
            }
            MetricsError::EmptyCorpus => {
                CliError::new("EmptyCorpus", e.to_string(), Exit::Validation)
            }
            MetricsError::Bootstrap(b) => b.into(),
        }
    }
}

impl From<BootstrapError> for CliError {
    fn from(e: BootstrapError) -> CliError {
        match e {
            BootstrapError::TooFewResamples(_) => {
                CliError::new("TooFewResamples", e.to_string(), Exit::Usage)
            }
            BootstrapError::InsufficientData(_) => {
                CliError::new("InsufficientData", e.to_string(), Exit::Validation)
            }
            BootstrapError::Domain(_) => {
                CliError::new("DomainError", e.to_string(), Exit::Validation)
            }
        }
    }
}

impl From<LlmError> for CliError {
    fn from(e: LlmError) -> CliError {
        CliError::from_llm(&e)
    }
}

impl CliError {
    pub fn from_llm(e: &LlmError) -> CliError {
        let exit = if e.is_provider_failure() || matches!(e, LlmError::ParseFailure { .. }) {
            Exit::Provider
        } else if matches!(e, LlmError::Config(_)) {
            Exit::Usage
        } else {
            Exit::Validation
        };
        CliError::new(e.kind(), e.to_string(), exit)
    }
}
