//! Documents, reference and predicted annotations.

mod anchor;
mod io;
mod stats;
mod text;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::typology::TypologyError;

pub use anchor::anchor_predictions;
pub use io::{
    import_inline, load_corpus, parse_reference_corpus, read_predictions, validate_document,
    write_document, write_predictions_tsv, CorpusLoad, Diagnostic, DocumentFile, ErrorRecord,
};
pub use stats::{corpus_stats, CorpusStats};
pub use text::{
    cp_len, normalize_surface, normalize_with_map, split_sentences, CharIndex, NormalizationLevel,
    NormalizedText, Span,
};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{doc}: error #{index} has an invalid span")]
    InvalidSpan { doc: String, index: usize },
    #[error("{doc}: error #{index}: {source}")]
    UnknownLabel {
        doc: String,
        index: usize,
        #[source]
        source: TypologyError,
    },
    #[error("{doc}: error #{index} has no labels")]
    EmptyLabels { doc: String, index: usize },
    #[error("{doc}: error #{index} duplicates the span of an earlier error")]
    DuplicateError { doc: String, index: usize },
    #[error("{doc}: sentence #{index} is invalid: {reason}")]
    InvalidSentences {
        doc: String,
        index: usize,
        reason: String,
    },
    #[error("{doc}: document id appears more than once")]
    DuplicateDocId { doc: String },
    #[error("{doc}: prediction #{index} cites sentence {sentence} but the document has {count}")]
    InvalidSentenceIndex {
        doc: String,
        index: usize,
        sentence: usize,
        count: usize,
    },
    #[error("inline markup: {0}")]
    InlineMarkup(String),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("{path}: {message}")]
    Format { path: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CorpusError {
    /// Stable machine-readable kind.
    pub fn kind(&self) -> &'static str {
        match self {
            CorpusError::InvalidSpan { .. } => "InvalidSpan",
            CorpusError::UnknownLabel { .. } => "UnknownLabel",
            CorpusError::EmptyLabels { .. } => "EmptyLabels",
            CorpusError::DuplicateError { .. } => "DuplicateError",
            CorpusError::InvalidSentences { .. } => "InvalidSentences",
            CorpusError::DuplicateDocId { .. } => "DuplicateDocId",
            CorpusError::InvalidSentenceIndex { .. } => "InvalidSentenceIndex",
            CorpusError::InlineMarkup(_) => "InlineMarkup",
            CorpusError::EmptyCorpus => "EmptyCorpus",
            CorpusError::Format { .. } => "FormatError",
            CorpusError::Io { .. } => "IoError",
        }
    }
}

/// MT system that produced a translation.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum MtSystem {
    DeepL,
    ChatGpt,
    Other(String),
}

impl From<String> for MtSystem {
    fn from(s: String) -> MtSystem {
        match s.trim().to_ascii_lowercase().as_str() {
            "deepl" => MtSystem::DeepL,
            "chatgpt" => MtSystem::ChatGpt,
            _ => MtSystem::Other(s),
        }
    }
}

impl From<MtSystem> for String {
    fn from(m: MtSystem) -> String {
        m.to_string()
    }
}

impl fmt::Display for MtSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MtSystem::DeepL => f.write_str("DeepL"),
            MtSystem::ChatGpt => f.write_str("ChatGPT"),
            MtSystem::Other(s) => f.write_str(s),
        }
    }
}

/// An expert-annotated error: a span of the target text and the canonical
/// codes of its labels, in file order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReferenceError {
    pub span: Span,
    pub labels: Vec<String>,
}

/// A translation with its source and reference annotations. Spans count
/// Unicode code points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedDocument {
    pub doc_id: String,
    pub mt_system: MtSystem,
    pub source_text: String,
    pub target_text: String,
    /// Target-side sentence spans.
    pub sentences: Vec<Span>,
    /// Source-side sentence spans aligned with `sentences`, when known.
    pub source_sentences: Option<Vec<Span>>,
    pub reference_errors: Vec<ReferenceError>,
}

impl AnnotatedDocument {
    pub fn target_len(&self) -> usize {
        cp_len(&self.target_text)
    }

    /// Target text covered by `span`.
    pub fn target_slice(&self, span: Span) -> &str {
        CharIndex::new(&self.target_text).slice(&self.target_text, span)
    }

    pub fn surface(&self, error: &ReferenceError) -> &str {
        self.target_slice(error.span)
    }
}

/// Where a predicted surface ended up in the target text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorStatus {
    Exact,
    Normalized,
    #[default]
    Unanchored,
}

/// One error asserted by the annotator. Carries a single raw label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictedAnnotation {
    pub doc_id: String,
    /// Zero-based target sentence index.
    #[serde(default)]
    pub sentence_index: Option<usize>,
    pub surface: String,
    pub label: String,
    #[serde(default)]
    pub explanation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<Span>,
    #[serde(default)]
    pub anchor_status: AnchorStatus,
}

impl PredictedAnnotation {
    pub fn new(doc_id: &str, sentence_index: Option<usize>, surface: &str, label: &str) -> Self {
        PredictedAnnotation {
            doc_id: doc_id.to_string(),
            sentence_index,
            surface: surface.to_string(),
            label: label.to_string(),
            explanation: None,
            anchor: None,
            anchor_status: AnchorStatus::Unanchored,
        }
    }
}
