//! Locating predicted surfaces in the target text.

use std::collections::HashSet;

use super::text::{normalize_surface, normalize_with_map, CharIndex, Span};
use super::{AnchorStatus, AnnotatedDocument, CorpusError, PredictedAnnotation};

fn exact_occurrences(text: &str, index: &CharIndex, scope: Span, needle: &str) -> Vec<Span> {
    if needle.is_empty() {
        return Vec::new();
    }
    let haystack = index.slice(text, scope);
    let base = index.byte(scope.start);
    let needle_len = needle.chars().count();
    let mut out = Vec::new();
    let mut from = 0;
    while let Some(pos) = haystack[from..].find(needle) {
        let byte = base + from + pos;
        let start = index.code_point(byte);
        out.push(Span::new(start, start + needle_len));
        // Step one char so overlapping occurrences are found.
        let step = haystack[from + pos..]
            .chars()
            .next()
            .map_or(1, char::len_utf8);
        from += pos + step;
    }
    out
}

fn normalized_occurrences(text: &str, index: &CharIndex, scope: Span, surface: &str) -> Vec<Span> {
    let needle: Vec<char> = normalize_surface(surface).chars().collect();
    if needle.is_empty() {
        return Vec::new();
    }
    let norm = normalize_with_map(index.slice(text, scope));
    if norm.text.len() < needle.len() {
        return Vec::new();
    }
    (0..=norm.text.len() - needle.len())
        .filter(|&i| norm.text[i..i + needle.len()] == needle[..])
        .map(|i| {
            let start = scope.start + norm.origin[i];
            let end = scope.start + norm.origin[i + needle.len() - 1] + 1;
            Span::new(start, end)
        })
        .collect()
}

/// Anchors each prediction to a span of the document's target text.
///
/// The search covers the prediction's sentence when it names one, else the
/// whole target. Predictions are processed in input order and each takes the
/// leftmost occurrence not already claimed by an earlier prediction: first an
/// exact match, then a normalized match (see
/// [`normalize_surface`](super::normalize_surface)). When every occurrence is
/// already claimed the leftmost one is reused. Surfaces that cannot be found
/// stay unanchored.
pub fn anchor_predictions(
    doc: &AnnotatedDocument,
    preds: &[PredictedAnnotation],
) -> Result<Vec<PredictedAnnotation>, CorpusError> {
    let index = CharIndex::new(&doc.target_text);
    let whole = Span::new(0, index.len());
    let mut claimed: HashSet<Span> = HashSet::new();
    let mut out = Vec::with_capacity(preds.len());
    for (i, pred) in preds.iter().enumerate() {
        let scope = match pred.sentence_index {
            Some(s) => *doc
                .sentences
                .get(s)
                .ok_or_else(|| CorpusError::InvalidSentenceIndex {
                    doc: doc.doc_id.clone(),
                    index: i,
                    sentence: s,
                    count: doc.sentences.len(),
                })?,
            None => whole,
        };
        let exact = exact_occurrences(&doc.target_text, &index, scope, &pred.surface);
        let normalized = normalized_occurrences(&doc.target_text, &index, scope, &pred.surface);
        let unclaimed = |v: &[Span]| v.iter().copied().find(|s| !claimed.contains(s));
        let found = unclaimed(&exact)
            .map(|s| (s, AnchorStatus::Exact))
            .or_else(|| unclaimed(&normalized).map(|s| (s, AnchorStatus::Normalized)))
            .or_else(|| exact.first().map(|&s| (s, AnchorStatus::Exact)))
            .or_else(|| normalized.first().map(|&s| (s, AnchorStatus::Normalized)));
        let mut p = pred.clone();
        match found {
            Some((span, status)) => {
                claimed.insert(span);
                p.anchor = Some(span);
                p.anchor_status = status;
            }
            None => {
                p.anchor = None;
                p.anchor_status = AnchorStatus::Unanchored;
            }
        }
        out.push(p);
    }
    Ok(out)
}
