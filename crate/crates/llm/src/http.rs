//! Adapter for the common JSON chat-completion API shape: a POST of
//! `{model, messages: [{role, content}]}` answered by
//! `{choices: [{message: {content}}], usage}`.

use std::collections::HashMap;
use std::fmt;
use std::sync::Mutex;
use std::time::Duration;

use base64::Engine;
use serde_json::{json, Value};

use crate::error::LlmError;
use crate::provider::{
    ChatProvider, ChatReply, ChatRequest, ProviderConfig, ProviderError, Role, TokenUsage,
};

pub struct HttpProvider {
    provider_id: String,
    endpoint: String,
    model: String,
    credential: Option<String>,
    attachment_file_id: Option<String>,
    sampling: serde_json::Map<String, Value>,
    agent: ureq::Agent,
    inline_cache: Mutex<HashMap<String, String>>,
}

impl fmt::Debug for HttpProvider {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HttpProvider")
            .field("provider_id", &self.provider_id)
            .field("endpoint", &self.endpoint)
            .field("model", &self.model)
            .field(
                "credential",
                &self.credential.as_ref().map(|_| "<redacted>"),
            )
            .finish_non_exhaustive()
    }
}

impl HttpProvider {
    pub fn from_config(cfg: &ProviderConfig) -> Result<HttpProvider, LlmError> {
        let endpoint = cfg
            .endpoint
            .clone()
            .ok_or_else(|| LlmError::Config("http provider needs \"endpoint\"".into()))?;
        if cfg.model.is_empty() {
            return Err(LlmError::Config("http provider needs \"model\"".into()));
        }
        let credential =
            match &cfg.credential_env {
                Some(var) => Some(std::env::var(var).map_err(|_| {
                    LlmError::Auth(format!("environment variable {var} is not set"))
                })?),
                None => None,
            };
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(cfg.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(HttpProvider {
            provider_id: cfg.provider_id.clone().unwrap_or_else(|| "http".into()),
            endpoint,
            model: cfg.model.clone(),
            credential,
            attachment_file_id: cfg.attachment_file_id.clone(),
            sampling: cfg
                .sampling
                .iter()
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
            agent,
            inline_cache: Mutex::new(HashMap::new()),
        })
    }

    fn file_part(&self, request: &ChatRequest<'_>) -> Result<Option<Value>, ProviderError> {
        let Some(att) = request.attachment else {
            return Ok(None);
        };
        if let Some(id) = &self.attachment_file_id {
            return Ok(Some(json!({"type": "file", "file": {"file_id": id}})));
        }
        let mut cache = self.inline_cache.lock().expect("cache lock");
        let data = match cache.get(&att.sha256) {
            Some(d) => d.clone(),
            None => {
                let bytes = att
                    .read()
                    .map_err(|e| ProviderError::Fatal(e.to_string()))?;
                let d = base64::engine::general_purpose::STANDARD.encode(bytes);
                cache.insert(att.sha256.clone(), d.clone());
                d
            }
        };
        let mime = if att.file_name.to_ascii_lowercase().ends_with(".pdf") {
            "application/pdf"
        } else {
            "application/octet-stream"
        };
        Ok(Some(json!({
            "type": "file",
            "file": {"filename": att.file_name, "file_data": format!("data:{mime};base64,{data}")}
        })))
    }

    /// Request body for `request`; public for inspection in tests.
    pub fn body(&self, request: &ChatRequest<'_>) -> Result<Value, ProviderError> {
        let file = self.file_part(request)?;
        let first_user = request.messages.iter().position(|m| m.role == Role::User);
        let messages: Vec<Value> = request
            .messages
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let role = match m.role {
                    Role::System => "system",
                    Role::User => "user",
                    Role::Assistant => "assistant",
                };
                match (&file, Some(i) == first_user) {
                    (Some(f), true) => {
                        json!({"role": role, "content": [{"type": "text", "text": m.content}, f]})
                    }
                    _ => json!({"role": role, "content": m.content}),
                }
            })
            .collect();
        let mut body = serde_json::Map::new();
        body.insert("model".into(), json!(self.model));
        body.insert("messages".into(), Value::Array(messages));
        for (k, v) in &self.sampling {
            body.insert(k.clone(), v.clone());
        }
        Ok(Value::Object(body))
    }
}

fn classify_status(status: u16, detail: String) -> ProviderError {
    match status {
        401 | 403 => ProviderError::Auth(format!("HTTP {status}: {detail}")),
        408 | 409 | 425 | 429 | 500..=599 => ProviderError::Transient {
            status: Some(status),
            message: detail,
        },
        _ => ProviderError::Fatal(format!("HTTP {status}: {detail}")),
    }
}

fn classify_transport(err: ureq::Error) -> ProviderError {
    match err {
        ureq::Error::StatusCode(s) => classify_status(s, String::new()),
        ureq::Error::Timeout(_)
        | ureq::Error::Io(_)
        | ureq::Error::HostNotFound
        | ureq::Error::ConnectionFailed
        | ureq::Error::Protocol(_) => ProviderError::Transient {
            status: None,
            message: err.to_string(),
        },
        other => ProviderError::Fatal(other.to_string()),
    }
}

/// Extracts the reply text and token usage from a response body.
pub fn parse_reply(body: &Value) -> Result<ChatReply, ProviderError> {
    let content = &body["choices"][0]["message"]["content"];
    let content = match content {
        Value::String(s) => s.clone(),
        Value::Array(parts) => parts
            .iter()
            .filter_map(|p| p["text"].as_str())
            .collect::<Vec<_>>()
            .join(""),
        _ => {
            return Err(ProviderError::Fatal(format!(
                "response has no message content: {body}"
            )))
        }
    };
    let usage = body.get("usage").and_then(|u| {
        Some(TokenUsage {
            prompt_tokens: u.get("prompt_tokens")?.as_u64()?,
            completion_tokens: u.get("completion_tokens")?.as_u64()?,
        })
    });
    Ok(ChatReply { content, usage })
}

impl ChatProvider for HttpProvider {
    fn provider_id(&self) -> &str {
        &self.provider_id
    }

    fn model_id(&self) -> &str {
        &self.model
    }

    fn send(&self, request: &ChatRequest<'_>) -> Result<ChatReply, ProviderError> {
        let body = self.body(request)?;
        let mut req = self
            .agent
            .post(&self.endpoint)
            .header("Content-Type", "application/json");
        if let Some(key) = &self.credential {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(&body).map_err(classify_transport)?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(classify_transport)?;
        if !(200..300).contains(&status) {
            let mut detail = text;
            detail.truncate(500);
            return Err(classify_status(status, detail));
        }
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| ProviderError::Fatal(format!("response is not JSON: {e}")))?;
        parse_reply(&value)
    }
}
