//! Running prompt chains against a provider, and replaying stored runs.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use annoteval_core::PredictedAnnotation;

use crate::chain::PromptChain;
use crate::error::LlmError;
use crate::provider::{send_with_retry, ChatProvider, ChatRequest, Message, RetryPolicy};
use crate::table::parse_annotation_table;
use crate::transcript::{now_ms, ChatTranscript, TranscriptStep, TranscriptStore};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotationOutcome {
    pub transcript: ChatTranscript,
    pub predictions: Vec<PredictedAnnotation>,
    /// Table rows the parser skipped.
    pub diagnostics: Vec<String>,
}

fn parse(transcript: ChatTranscript) -> Result<AnnotationOutcome, LlmError> {
    let raw = transcript.final_response().unwrap_or("");
    let table = parse_annotation_table(raw, &transcript.doc_id)?;
    Ok(AnnotationOutcome {
        predictions: table.predictions,
        diagnostics: table.diagnostics,
        transcript,
    })
}

/// Sends the chain's steps in order within one conversation. The transcript
/// is saved after every step, on failure, and before the final table is
/// parsed, so nothing received is lost.
pub fn run_annotation(
    provider: &dyn ChatProvider,
    policy: &RetryPolicy,
    chain: &PromptChain,
    store: &TranscriptStore,
    run_id: &str,
) -> Result<AnnotationOutcome, LlmError> {
    let mut transcript = ChatTranscript {
        doc_id: chain.doc_id.clone(),
        run_id: run_id.to_string(),
        provider_id: provider.provider_id().to_string(),
        model_id: provider.model_id().to_string(),
        variant: chain.variant,
        language: chain.language.clone(),
        attachment: chain.attachment.clone(),
        steps: Vec::new(),
        complete: false,
        error: None,
    };
    let mut messages: Vec<Message> = Vec::new();
    for (step, text) in chain.steps.iter().enumerate() {
        messages.push(Message::user(text.clone()));
        let request = ChatRequest {
            doc_id: &chain.doc_id,
            step,
            messages: &messages,
            attachment: chain.attachment.as_ref(),
        };
        let started_ms = now_ms();
        match send_with_retry(provider, &request, policy) {
            Ok(got) => {
                transcript.steps.push(TranscriptStep {
                    request: text.clone(),
                    response: got.reply.content.clone(),
                    attempts: got.attempts,
                    started_ms,
                    finished_ms: now_ms(),
                    usage: got.reply.usage,
                });
                messages.push(Message::assistant(got.reply.content));
                store.save(&transcript)?;
            }
            Err(e) => {
                transcript.error = Some(format!("step {}: {e}", step + 1));
                store.save(&transcript)?;
                return Err(e);
            }
        }
    }
    transcript.complete = true;
    store.save(&transcript)?;
    parse(transcript)
}

/// Re-parses a stored run without contacting any provider.
pub fn replay(store: &TranscriptStore, doc_id: &str) -> Result<AnnotationOutcome, LlmError> {
    let transcript = store.load(doc_id)?;
    if !transcript.complete {
        return Err(LlmError::Incomplete(doc_id.to_string()));
    }
    parse(transcript)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    /// Sent to the provider in this run.
    Sent,
    /// Taken from a complete transcript already in the store.
    Resumed,
}

#[derive(Debug)]
pub struct BatchItem {
    pub doc_id: String,
    pub origin: Origin,
    pub result: Result<AnnotationOutcome, LlmError>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchOptions {
    pub max_parallel: usize,
    /// Re-send documents that already have a complete transcript.
    pub force: bool,
}

/// Annotates every chain, up to `max_parallel` conversations at a time.
/// Results come back in input order regardless of scheduling.
pub fn run_batch(
    provider: &dyn ChatProvider,
    policy: &RetryPolicy,
    chains: &[PromptChain],
    store: &TranscriptStore,
    run_id: &str,
    options: BatchOptions,
) -> Vec<BatchItem> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<BatchItem>>> =
        Mutex::new((0..chains.len()).map(|_| None).collect());
    let workers = options.max_parallel.clamp(1, chains.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(chain) = chains.get(i) else { break };
                let item = if !options.force && store.has_complete(&chain.doc_id) {
                    log::info!("{}: complete transcript found, not re-sent", chain.doc_id);
                    BatchItem {
                        doc_id: chain.doc_id.clone(),
                        origin: Origin::Resumed,
                        result: replay(store, &chain.doc_id),
                    }
                } else {
                    log::info!("{}: sending {} steps", chain.doc_id, chain.steps.len());
                    BatchItem {
                        doc_id: chain.doc_id.clone(),
                        origin: Origin::Sent,
                        result: run_annotation(provider, policy, chain, store, run_id),
                    }
                };
                slots.lock().expect("slots lock")[i] = Some(item);
            });
        }
    });
    slots
        .into_inner()
        .expect("slots lock")
        .into_iter()
        .map(|s| s.expect("every chain processed"))
        .collect()
}
