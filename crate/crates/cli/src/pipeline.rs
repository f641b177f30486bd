//! Anchor, match, score and aggregate a set of predictions.

use std::collections::{BTreeMap, BTreeSet};

use annoteval_core::matching::{match_document_traced, MatchPair, SpanMatching};
use annoteval_core::metrics::CiConfig;
use annoteval_core::{
    aggregate, anchor_predictions, score_document, AnnotatedDocument, EvaluationReport,
};
use annoteval_core::{AnchorStatus, PredictedAnnotation, Span, Typology};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CliError, Exit};

#[derive(Debug, Clone, Serialize)]
pub struct AnchorTrace {
    pub index: usize,
    pub sentence_index: Option<usize>,
    pub surface: String,
    pub label: String,
    pub anchor: Option<Span>,
    pub anchor_status: AnchorStatus,
}

/// How one document's predictions were anchored and matched.
#[derive(Debug, Clone, Serialize)]
pub struct DocumentTrace {
    pub doc_id: String,
    pub reference_spans: Vec<Span>,
    pub predictions: Vec<AnchorTrace>,
    pub matching: SpanMatching,
    pub pairs: Vec<MatchPair>,
    pub unmatched_refs: Vec<usize>,
    pub unmatched_preds: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: EvaluationReport<f64>,
    /// Sorted by doc_id, like the report's scores.
    pub traces: Vec<DocumentTrace>,
}

/// Groups predictions by document. Every prediction must name a corpus document.
pub fn group_predictions<'a>(
    docs: &[AnnotatedDocument],
    preds: &'a [PredictedAnnotation],
) -> Result<BTreeMap<String, Vec<&'a PredictedAnnotation>>, CliError> {
    let known: BTreeSet<&str> = docs.iter().map(|d| d.doc_id.as_str()).collect();
    let unknown: BTreeSet<&str> = preds
        .iter()
        .map(|p| p.doc_id.as_str())
        .filter(|id| !known.contains(id))
        .collect();
    if !unknown.is_empty() {
        let list: Vec<&str> = unknown.into_iter().collect();
        return Err(CliError::new(
            "DocSetMismatch",
            format!(
                "predictions name documents missing from the corpus: {}",
                list.join(", ")
            ),
            Exit::Validation,
        ));
    }
    let mut by_doc: BTreeMap<String, Vec<&PredictedAnnotation>> = docs
        .iter()
        .map(|d| (d.doc_id.clone(), Vec::new()))
        .collect();
    for p in preds {
        by_doc.get_mut(&p.doc_id).expect("checked above").push(p);
    }
    Ok(by_doc)
}

fn evaluate_document(
    doc: &AnnotatedDocument,
    preds: &[&PredictedAnnotation],
    typology: &Typology,
) -> Result<(annoteval_core::DocumentScore<f64>, DocumentTrace), CliError> {
    let owned: Vec<PredictedAnnotation> = preds.iter().map(|p| (*p).clone()).collect();
    let anchored = anchor_predictions(doc, &owned)?;
    let (m, matching) = match_document_traced(&doc.reference_errors, &anchored, typology);
    let score = score_document(&doc.doc_id, &m);
    let trace = DocumentTrace {
        doc_id: doc.doc_id.clone(),
        reference_spans: doc.reference_errors.iter().map(|e| e.span).collect(),
        predictions: anchored
            .iter()
            .enumerate()
            .map(|(index, p)| AnchorTrace {
                index,
                sentence_index: p.sentence_index,
                surface: p.surface.clone(),
                label: p.label.clone(),
                anchor: p.anchor,
                anchor_status: p.anchor_status,
            })
            .collect(),
        matching,
        pairs: m.pairs,
        unmatched_refs: m.unmatched_refs,
        unmatched_preds: m.unmatched_preds,
    };
    Ok((score, trace))
}

/// Scores every corpus document; documents without predictions score as empty runs.
/// Documents are processed in parallel and merged in doc_id order.
pub fn evaluate(
    docs: &[AnnotatedDocument],
    preds: &[PredictedAnnotation],
    typology: &Typology,
    ci: &CiConfig,
) -> Result<Evaluation, CliError> {
    let by_doc = group_predictions(docs, preds)?;
    let mut sorted: Vec<&AnnotatedDocument> = docs.iter().collect();
    sorted.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
    let results: Vec<_> = sorted
        .par_iter()
        .map(|doc| evaluate_document(doc, &by_doc[&doc.doc_id], typology))
        .collect::<Result<_, _>>()?;
    let (scores, traces): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let report = aggregate(&scores, ci)?;
    Ok(Evaluation { report, traces })
}

#[cfg(test)]
mod tests {
    use super::*;
    use annoteval_core::{MtSystem, ReferenceError};

    fn doc(id: &str) -> AnnotatedDocument {
        let target = "Elle se focusse sur l'analyse.";
        AnnotatedDocument {
            doc_id: id.into(),
            mt_system: MtSystem::DeepL,
            source_text: "It focuses on analysis.".into(),
            target_text: target.into(),
            sentences: annoteval_core::split_sentences(target),
            source_sentences: None,
            reference_errors: vec![ReferenceError {
                span: Span::new(8, 15),
                labels: vec!["TR-SI-TL".into()],
            }],
        }
    }

    #[test]
    fn unknown_document_is_rejected() {
        let preds = vec![PredictedAnnotation::new("zz", None, "focusse", "TR-SI-TL")];
        let err = group_predictions(&[doc("a")], &preds).unwrap_err();
        assert_eq!(err.kind, "DocSetMismatch");
        assert!(err.message.contains("zz"));
    }

    #[test]
    fn merge_order_is_by_doc_id() {
        let docs = vec![doc("b"), doc("a"), doc("c")];
        let preds = vec![PredictedAnnotation::new("b", None, "focusse", "TR-SI-TL")];
        let ci = CiConfig {
            resamples: 1000,
            seed: 1,
            level: 0.95,
        };
        let e = evaluate(&docs, &preds, &Typology::bundled(), &ci).unwrap();
        let ids: Vec<&str> = e.report.scores.iter().map(|s| s.doc_id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
        assert_eq!(e.report.scores[1].n_label_correct, 1);
        assert_eq!(e.traces[1].pairs.len(), 1);
    }
}
