//! Prompt-chained error annotation with a chat-completion model.
//!
//! A [`PromptChain`] holds the four messages sent for one document:
//! instructions, the typology, the texts, and a request to restate the
//! annotations as a table. [`run_annotation`] sends them within one
//! conversation, records everything in a [`TranscriptStore`] and parses the
//! final table into predicted annotations. Stored runs can be re-parsed
//! offline with [`replay`].

pub mod annotate;
pub mod chain;
pub mod error;
pub mod http;
pub mod provider;
pub mod table;
pub mod transcript;

pub use annotate::{
    replay, run_annotation, run_batch, AnnotationOutcome, BatchItem, BatchOptions, Origin,
};
pub use chain::{
    build_chain, build_chain_with, Attachment, PromptChain, PromptTemplates, PromptVariant,
};
pub use error::LlmError;
pub use provider::{
    ChatProvider, ChatReply, ChatRequest, Message, ProviderConfig, ProviderError, ProviderKind,
    RetryPolicy, Role, Script, ScriptedProvider, TokenUsage,
};
pub use table::{parse_annotation_table, render_annotation_table, ParsedTable};
pub use transcript::{ChatTranscript, RunManifest, TranscriptStep, TranscriptStore};
