//! Chat-completion providers and the retry policy around them.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::chain::Attachment;
use crate::error::LlmError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn user(content: impl Into<String>) -> Message {
        Message {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Message {
        Message {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

/// One request in a conversation: the full history so far, ending with the
/// new user message.
#[derive(Debug, Clone, Copy)]
pub struct ChatRequest<'a> {
    pub doc_id: &'a str,
    /// Zero-based step number within the chain.
    pub step: usize,
    pub messages: &'a [Message],
    /// Sent with the first user message.
    pub attachment: Option<&'a Attachment>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatReply {
    pub content: String,
    pub usage: Option<TokenUsage>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProviderError {
    /// Bad or missing credentials. Never retried.
    Auth(String),
    /// Rate limits, server errors, timeouts, connection failures.
    Transient {
        status: Option<u16>,
        message: String,
    },
    /// The request itself was rejected. Never retried.
    Fatal(String),
}

/// A chat-completion backend. Implementations must be usable from several
/// threads, one conversation per thread.
pub trait ChatProvider: Send + Sync {
    fn provider_id(&self) -> &str;
    fn model_id(&self) -> &str;
    fn send(&self, request: &ChatRequest<'_>) -> Result<ChatReply, ProviderError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    /// Delay before the first retry; doubled for each further retry.
    pub backoff_base_ms: u64,
    pub backoff_max_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 5,
            backoff_base_ms: 1000,
            backoff_max_ms: 60_000,
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `retry` (1-based).
    pub fn delay(&self, retry: u32) -> Duration {
        let factor = 1u64
            .checked_shl(retry.saturating_sub(1))
            .unwrap_or(u64::MAX);
        Duration::from_millis(
            self.backoff_base_ms
                .saturating_mul(factor)
                .min(self.backoff_max_ms),
        )
    }
}

/// A reply together with the number of attempts it took.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attempted {
    pub reply: ChatReply,
    pub attempts: u32,
}

/// Sends `request`, retrying transient failures per `policy`.
pub fn send_with_retry(
    provider: &dyn ChatProvider,
    request: &ChatRequest<'_>,
    policy: &RetryPolicy,
) -> Result<Attempted, LlmError> {
    let max = policy.max_attempts.max(1);
    let mut attempt = 0;
    loop {
        attempt += 1;
        match provider.send(request) {
            Ok(reply) => {
                return Ok(Attempted {
                    reply,
                    attempts: attempt,
                })
            }
            Err(ProviderError::Auth(m)) => return Err(LlmError::Auth(m)),
            Err(ProviderError::Fatal(m)) => return Err(LlmError::ProviderRejected(m)),
            Err(ProviderError::Transient { status, message }) => {
                if attempt >= max {
                    return Err(LlmError::ProviderUnavailable {
                        status,
                        message,
                        attempts: attempt,
                    });
                }
                let wait = policy.delay(attempt);
                log::warn!(
                    "{} step {}: transient failure ({message}); retry {attempt} in {wait:?}",
                    request.doc_id,
                    request.step + 1
                );
                std::thread::sleep(wait);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    /// JSON chat-completion API over HTTP(S).
    Http,
    /// Canned responses from a file, for offline runs.
    Scripted,
}

/// Provider settings as read from a config file. The credential itself is
/// never stored here, only the name of the environment variable holding it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    #[serde(default)]
    pub provider_id: Option<String>,
    /// Full URL of the chat-completion endpoint.
    #[serde(default)]
    pub endpoint: Option<String>,
    /// Upload reference of an attachment already stored with the provider.
    /// Without it the attachment is sent inline.
    #[serde(default)]
    pub attachment_file_id: Option<String>,
    #[serde(default)]
    pub model: String,
    #[serde(default)]
    pub credential_env: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(default = "default_parallel")]
    pub max_parallel: usize,
    /// Passed through verbatim in each request body (temperature, ...).
    #[serde(default)]
    pub sampling: BTreeMap<String, serde_json::Value>,
    /// Scripted providers: file of canned responses, relative to the config.
    #[serde(default)]
    pub script: Option<String>,
}

fn default_timeout() -> u64 {
    120
}

fn default_parallel() -> usize {
    4
}

impl ProviderConfig {
    pub fn load(path: &Path) -> Result<ProviderConfig, LlmError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LlmError::io(path.display().to_string(), e))?;
        let mut cfg: ProviderConfig = serde_json::from_str(&text)
            .map_err(|e| LlmError::Config(format!("{}: {e}", path.display())))?;
        if let (Some(script), Some(dir)) = (&cfg.script, path.parent()) {
            cfg.script = Some(dir.join(script).display().to_string());
        }
        Ok(cfg)
    }

    /// A scripted configuration reading responses from `script`.
    pub fn scripted(script: &Path) -> ProviderConfig {
        ProviderConfig {
            kind: ProviderKind::Scripted,
            provider_id: None,
            endpoint: None,
            attachment_file_id: None,
            model: String::new(),
            credential_env: None,
            timeout_secs: default_timeout(),
            retry: RetryPolicy::default(),
            max_parallel: 1,
            sampling: BTreeMap::new(),
            script: Some(script.display().to_string()),
        }
    }

    /// Instantiates the configured provider. Credentials are resolved here,
    /// before anything is sent.
    pub fn connect(&self) -> Result<Box<dyn ChatProvider>, LlmError> {
        match self.kind {
            ProviderKind::Http => Ok(Box::new(crate::http::HttpProvider::from_config(self)?)),
            ProviderKind::Scripted => {
                let path = self
                    .script
                    .as_deref()
                    .ok_or_else(|| LlmError::Config("scripted provider needs \"script\"".into()))?;
                Ok(Box::new(ScriptedProvider::load(Path::new(path))?))
            }
        }
    }
}

/// Canned responses keyed by document, one per chain step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Script {
    #[serde(default = "scripted_id")]
    pub provider_id: String,
    #[serde(default = "scripted_model")]
    pub model: String,
    pub documents: BTreeMap<String, Vec<String>>,
}

fn scripted_id() -> String {
    "scripted".into()
}

fn scripted_model() -> String {
    "scripted".into()
}

/// Offline provider answering from a [`Script`]. Unknown documents or steps
/// beyond the script are rejected.
#[derive(Debug, Clone)]
pub struct ScriptedProvider {
    script: Script,
}

impl ScriptedProvider {
    pub fn new(script: Script) -> ScriptedProvider {
        ScriptedProvider { script }
    }

    pub fn load(path: &Path) -> Result<ScriptedProvider, LlmError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LlmError::io(path.display().to_string(), e))?;
        let script = serde_json::from_str(&text)
            .map_err(|e| LlmError::Config(format!("{}: {e}", path.display())))?;
        Ok(ScriptedProvider { script })
    }
}

impl ChatProvider for ScriptedProvider {
    fn provider_id(&self) -> &str {
        &self.script.provider_id
    }

    fn model_id(&self) -> &str {
        &self.script.model
    }

    fn send(&self, request: &ChatRequest<'_>) -> Result<ChatReply, ProviderError> {
        let replies = self.script.documents.get(request.doc_id).ok_or_else(|| {
            ProviderError::Fatal(format!("no scripted responses for {}", request.doc_id))
        })?;
        let content = replies.get(request.step).ok_or_else(|| {
            ProviderError::Fatal(format!(
                "no scripted response for {} step {}",
                request.doc_id,
                request.step + 1
            ))
        })?;
        Ok(ChatReply {
            content: content.clone(),
            usage: None,
        })
    }
}
