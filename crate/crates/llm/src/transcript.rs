//! Conversation transcripts and their on-disk store.
//!
//! A run directory holds `manifest.json` and `transcripts/<doc_id>.json`. Each
//! transcript file records the SHA-256 of its transcript's canonical JSON so
//! corrupted or hand-edited files are detected on replay.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::chain::{Attachment, PromptVariant};
use crate::error::LlmError;
use crate::provider::TokenUsage;

/// Milliseconds since the Unix epoch.
pub fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptStep {
    pub request: String,
    pub response: String,
    pub attempts: u32,
    pub started_ms: u64,
    pub finished_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage: Option<TokenUsage>,
}

/// Everything exchanged with the provider for one document, in send order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatTranscript {
    pub doc_id: String,
    pub run_id: String,
    pub provider_id: String,
    pub model_id: String,
    pub variant: PromptVariant,
    pub language: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attachment: Option<Attachment>,
    pub steps: Vec<TranscriptStep>,
    /// All chain steps answered.
    pub complete: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ChatTranscript {
    pub fn retries(&self) -> u32 {
        self.steps
            .iter()
            .map(|s| s.attempts.saturating_sub(1))
            .sum()
    }

    /// Text of the last response, the annotation table for complete runs.
    pub fn final_response(&self) -> Option<&str> {
        self.steps.last().map(|s| s.response.as_str())
    }

    pub fn digest(&self) -> String {
        let canonical = serde_json::to_string(self).expect("transcript serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct StoredTranscript {
    sha256: String,
    transcript: ChatTranscript,
}

/// Run-level metadata. Timestamps are kept here rather than in reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub created_ms: u64,
    pub updated_ms: u64,
    pub provider_id: String,
    pub model_id: String,
    pub variant: PromptVariant,
    pub language: String,
    /// Sampling parameters as sent; empty means provider defaults.
    pub sampling: serde_json::Map<String, serde_json::Value>,
    pub retry_max_attempts: u32,
    pub retry_backoff_base_ms: u64,
    pub max_parallel: usize,
    pub documents: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct TranscriptStore {
    root: PathBuf,
}

fn valid_id(doc_id: &str) -> Result<(), LlmError> {
    let ok = !doc_id.is_empty()
        && doc_id != "."
        && doc_id != ".."
        && !doc_id.contains(['/', '\\', '\0']);
    if ok {
        Ok(())
    } else {
        Err(LlmError::Config(format!(
            "doc_id {doc_id:?} cannot be used as a file name"
        )))
    }
}

impl TranscriptStore {
    /// Opens (creating if needed) the store under the run directory `root`.
    pub fn open(root: impl Into<PathBuf>) -> Result<TranscriptStore, LlmError> {
        let root = root.into();
        let dir = root.join("transcripts");
        std::fs::create_dir_all(&dir).map_err(|e| LlmError::io(dir.display().to_string(), e))?;
        Ok(TranscriptStore { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, doc_id: &str) -> PathBuf {
        self.root.join("transcripts").join(format!("{doc_id}.json"))
    }

    /// Writes the transcript atomically (temp file then rename).
    pub fn save(&self, t: &ChatTranscript) -> Result<(), LlmError> {
        valid_id(&t.doc_id)?;
        let stored = StoredTranscript {
            sha256: t.digest(),
            transcript: t.clone(),
        };
        let mut text = serde_json::to_string_pretty(&stored).expect("transcript serializes");
        text.push('\n');
        let path = self.path(&t.doc_id);
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, text).map_err(|e| LlmError::io(tmp.display().to_string(), e))?;
        std::fs::rename(&tmp, &path).map_err(|e| LlmError::io(path.display().to_string(), e))
    }

    pub fn load(&self, doc_id: &str) -> Result<ChatTranscript, LlmError> {
        valid_id(doc_id)?;
        let path = self.path(doc_id);
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(LlmError::NotFound(doc_id.to_string()))
            }
            Err(e) => return Err(LlmError::io(path.display().to_string(), e)),
        };
        let corrupt = |actual: String| LlmError::Integrity {
            doc: doc_id.to_string(),
            expected: String::new(),
            actual,
        };
        let stored: StoredTranscript =
            serde_json::from_str(&text).map_err(|e| corrupt(format!("unreadable ({e})")))?;
        let actual = stored.transcript.digest();
        if actual != stored.sha256 {
            return Err(LlmError::Integrity {
                doc: doc_id.to_string(),
                expected: stored.sha256,
                actual,
            });
        }
        Ok(stored.transcript)
    }

    /// True when a complete transcript is stored for `doc_id`.
    pub fn has_complete(&self, doc_id: &str) -> bool {
        matches!(self.load(doc_id), Ok(t) if t.complete)
    }

    /// Document ids with a transcript file, sorted.
    pub fn doc_ids(&self) -> Result<Vec<String>, LlmError> {
        let dir = self.root.join("transcripts");
        let entries =
            std::fs::read_dir(&dir).map_err(|e| LlmError::io(dir.display().to_string(), e))?;
        let mut ids: Vec<String> = entries
            .filter_map(Result::ok)
            .filter_map(|e| {
                let name = e.file_name().to_string_lossy().into_owned();
                name.strip_suffix(".json").map(str::to_string)
            })
            .collect();
        ids.sort();
        Ok(ids)
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.root.join("manifest.json")
    }

    pub fn write_manifest(&self, m: &RunManifest) -> Result<(), LlmError> {
        let mut text = serde_json::to_string_pretty(m).expect("manifest serializes");
        text.push('\n');
        let path = self.manifest_path();
        std::fs::write(&path, text).map_err(|e| LlmError::io(path.display().to_string(), e))
    }

    pub fn read_manifest(&self) -> Result<Option<RunManifest>, LlmError> {
        let path = self.manifest_path();
        match std::fs::read_to_string(&path) {
            Ok(t) => serde_json::from_str(&t)
                .map(Some)
                .map_err(|e| LlmError::Config(format!("{}: {e}", path.display()))),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(LlmError::io(path.display().to_string(), e)),
        }
    }
}
