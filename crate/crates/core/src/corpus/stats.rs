use serde::{Deserialize, Serialize};

use super::{AnnotatedDocument, CorpusError};

/// Descriptive statistics of a reference corpus. Lengths are in code points;
/// words are whitespace-separated tokens of the target texts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n_docs: usize,
    pub n_errors: usize,
    pub mean_errors_per_doc: f64,
    pub span_len_min: Option<usize>,
    pub span_len_max: Option<usize>,
    pub span_len_mean: Option<f64>,
    pub labels_per_error_min: Option<usize>,
    pub labels_per_error_max: Option<usize>,
    pub labels_per_error_mean: Option<f64>,
    pub n_words: usize,
    pub n_source_words: usize,
}

pub fn corpus_stats(docs: &[AnnotatedDocument]) -> Result<CorpusStats, CorpusError> {
    if docs.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let lens: Vec<usize> = docs
        .iter()
        .flat_map(|d| d.reference_errors.iter().map(|e| e.span.len()))
        .collect();
    let labels: Vec<usize> = docs
        .iter()
        .flat_map(|d| d.reference_errors.iter().map(|e| e.labels.len()))
        .collect();
    let mean =
        |v: &[usize]| (!v.is_empty()).then(|| v.iter().sum::<usize>() as f64 / v.len() as f64);
    let words = |s: &str| s.split_whitespace().count();
    Ok(CorpusStats {
        n_docs: docs.len(),
        n_errors: lens.len(),
        mean_errors_per_doc: lens.len() as f64 / docs.len() as f64,
        span_len_min: lens.iter().copied().min(),
        span_len_max: lens.iter().copied().max(),
        span_len_mean: mean(&lens),
        labels_per_error_min: labels.iter().copied().min(),
        labels_per_error_max: labels.iter().copied().max(),
        labels_per_error_mean: mean(&labels),
        n_words: docs.iter().map(|d| words(&d.target_text)).sum(),
        n_source_words: docs.iter().map(|d| words(&d.source_text)).sum(),
    })
}
