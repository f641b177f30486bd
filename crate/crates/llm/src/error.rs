use thiserror::Error;

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("precondition violated for {doc}: {reason}")]
    Precondition { doc: String, reason: String },
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("provider unavailable after {attempts} attempt(s) (last status {}): {message}", status.map_or("none".to_string(), |s| s.to_string()))]
    ProviderUnavailable {
        status: Option<u16>,
        message: String,
        attempts: u32,
    },
    #[error("provider rejected the request: {0}")]
    ProviderRejected(String),
    #[error("could not parse the annotation table for {doc}: {reason}")]
    ParseFailure {
        doc: String,
        reason: String,
        raw: String,
    },
    #[error("no transcript stored for {0}")]
    NotFound(String),
    #[error(
        "transcript for {doc} is corrupted: digest {actual} does not match recorded {expected}"
    )]
    Integrity {
        doc: String,
        expected: String,
        actual: String,
    },
    #[error("transcript for {0} is incomplete")]
    Incomplete(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl LlmError {
    /// Stable name for diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            LlmError::Precondition { .. } => "PreconditionViolation",
            LlmError::Auth(_) => "AuthError",
            LlmError::ProviderUnavailable { .. } => "ProviderUnavailable",
            LlmError::ProviderRejected(_) => "ProviderRejected",
            LlmError::ParseFailure { .. } => "ParseFailure",
            LlmError::NotFound(_) => "NotFound",
            LlmError::Integrity { .. } => "IntegrityError",
            LlmError::Incomplete(_) => "IncompleteTranscript",
            LlmError::Config(_) => "ConfigError",
            LlmError::Io { .. } => "IoError",
        }
    }

    /// True for failures caused by the provider rather than local data.
    pub fn is_provider_failure(&self) -> bool {
        matches!(
            self,
            LlmError::Auth(_)
                | LlmError::ProviderUnavailable { .. }
                | LlmError::ProviderRejected(_)
        )
    }

    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> LlmError {
        LlmError::Io {
            path: path.into(),
            source,
        }
    }
}
