//! Per-document precision, recall and F1, and their macro averages.
//!
//! Scores are generic over [`Scalar`], so the same code runs on `f64`, `f32`
//! or exact rationals.

use std::collections::BTreeSet;
use std::fmt::Debug;

use num_traits::{Float, FromPrimitive, Num, ToPrimitive};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bootstrap::{bca_interval, BootstrapError, ConfidenceInterval};
use crate::matching::MatchResult;

/// Numeric type scores are computed in.
pub trait Scalar: Num + Clone + PartialOrd + Debug + FromPrimitive {}

impl<T> Scalar for T where T: Num + Clone + PartialOrd + Debug + FromPrimitive {}

fn from_count<T: Scalar>(n: usize) -> T {
    T::from_usize(n).expect("count fits the scalar type")
}

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no documents to aggregate")]
    EmptyCorpus,
    #[error("document sets differ: only in first {only_in_a:?}, only in second {only_in_b:?}")]
    DocSetMismatch {
        only_in_a: Vec<String>,
        only_in_b: Vec<String>,
    },
    #[error(transparent)]
    Bootstrap(#[from] BootstrapError),
}

/// Which degenerate-case conventions were applied to a document.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegenerateFlags {
    /// No predictions: precision taken as 1.
    pub vacuous_precision: bool,
    /// No reference errors: recall taken as 1.
    pub vacuous_recall: bool,
    /// Precision and recall both 0: F1 taken as 0.
    pub zero_f1: bool,
}

impl DegenerateFlags {
    pub fn any(&self) -> bool {
        self.vacuous_precision || self.vacuous_recall || self.zero_f1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentScore<T = f64> {
    pub doc_id: String,
    pub n_gold: usize,
    pub n_pred: usize,
    pub n_matched: usize,
    pub n_label_correct: usize,
    /// Predictions matching no reference error.
    pub n_false: usize,
    pub n_unanchored: usize,
    pub precision: T,
    pub recall: T,
    pub f1: T,
    pub degenerate: DegenerateFlags,
}

/// Scores one document from raw counts.
pub fn score_counts<T: Scalar>(
    doc_id: &str,
    n_gold: usize,
    n_pred: usize,
    n_matched: usize,
    n_label_correct: usize,
) -> DocumentScore<T> {
    assert!(
        n_matched <= n_gold.min(n_pred),
        "matched exceeds gold or predicted count"
    );
    assert!(n_label_correct <= n_matched);
    let mut flags = DegenerateFlags::default();
    let precision = if n_pred == 0 {
        flags.vacuous_precision = true;
        T::one()
    } else {
        from_count::<T>(n_matched) / from_count(n_pred)
    };
    let recall = if n_gold == 0 {
        flags.vacuous_recall = true;
        T::one()
    } else {
        from_count::<T>(n_matched) / from_count(n_gold)
    };
    let sum = precision.clone() + recall.clone();
    let f1 = if sum == T::zero() {
        flags.zero_f1 = true;
        T::zero()
    } else {
        from_count::<T>(2) * precision.clone() * recall.clone() / sum
    };
    DocumentScore {
        doc_id: doc_id.to_string(),
        n_gold,
        n_pred,
        n_matched,
        n_label_correct,
        n_false: n_pred - n_matched,
        n_unanchored: 0,
        precision,
        recall,
        f1,
        degenerate: flags,
    }
}

/// Scores a document from its matching.
pub fn score_document<T: Scalar>(doc_id: &str, m: &MatchResult) -> DocumentScore<T> {
    let mut s = score_counts(
        doc_id,
        m.n_gold(),
        m.n_pred(),
        m.n_matched(),
        m.n_label_correct,
    );
    s.n_unanchored = m.n_unanchored;
    s
}

/// Corpus-level figures that need no resampling.
///
/// Ratios are fractions in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroSummary<T = f64> {
    pub n_docs: usize,
    pub macro_precision: T,
    pub macro_recall: T,
    pub macro_f1: T,
    pub total_gold: usize,
    pub total_pred: usize,
    pub total_matched: usize,
    pub total_label_correct: usize,
    pub total_unanchored: usize,
    /// Label accuracy pooled over all matched errors. `None` when nothing matched.
    pub pct_correctly_labeled: Option<T>,
    /// Mean of per-document label accuracies over documents with a match.
    pub macro_label_accuracy: Option<T>,
    pub false_error_total: usize,
    pub false_error_mean_per_doc: T,
    pub false_error_min: usize,
    pub false_error_max: usize,
    /// Total false errors over total predictions. `None` without predictions.
    pub false_error_pct_of_pred: Option<T>,
    /// Documents where a degenerate convention fired.
    pub degenerate_docs: Vec<String>,
}

fn mean<T: Scalar>(values: impl Iterator<Item = T>) -> Option<T> {
    let mut sum = T::zero();
    let mut n = 0usize;
    for v in values {
        sum = sum + v;
        n += 1;
    }
    (n > 0).then(|| sum / from_count(n))
}

/// Unweighted means over documents plus pooled counts.
pub fn summarize<T: Scalar>(scores: &[DocumentScore<T>]) -> Result<MacroSummary<T>, MetricsError> {
    if scores.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    let total = |f: fn(&DocumentScore<T>) -> usize| scores.iter().map(f).sum::<usize>();
    let total_matched = total(|s| s.n_matched);
    let total_label_correct = total(|s| s.n_label_correct);
    let total_pred = total(|s| s.n_pred);
    let false_total = total(|s| s.n_false);
    Ok(MacroSummary {
        n_docs: scores.len(),
        macro_precision: mean(scores.iter().map(|s| s.precision.clone())).unwrap(),
        macro_recall: mean(scores.iter().map(|s| s.recall.clone())).unwrap(),
        macro_f1: mean(scores.iter().map(|s| s.f1.clone())).unwrap(),
        total_gold: total(|s| s.n_gold),
        total_pred,
        total_matched,
        total_label_correct,
        total_unanchored: total(|s| s.n_unanchored),
        pct_correctly_labeled: (total_matched > 0)
            .then(|| from_count::<T>(total_label_correct) / from_count(total_matched)),
        macro_label_accuracy: mean(
            scores
                .iter()
                .filter(|s| s.n_matched > 0)
                .map(|s| from_count::<T>(s.n_label_correct) / from_count(s.n_matched)),
        ),
        false_error_total: false_total,
        false_error_mean_per_doc: from_count::<T>(false_total) / from_count(scores.len()),
        false_error_min: scores.iter().map(|s| s.n_false).min().unwrap(),
        false_error_max: scores.iter().map(|s| s.n_false).max().unwrap(),
        false_error_pct_of_pred: (total_pred > 0)
            .then(|| from_count::<T>(false_total) / from_count(total_pred)),
        degenerate_docs: scores
            .iter()
            .filter(|s| s.degenerate.any())
            .map(|s| s.doc_id.clone())
            .collect(),
    })
}

/// Bootstrap settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CiConfig {
    pub resamples: usize,
    pub seed: u64,
    pub level: f64,
}

impl Default for CiConfig {
    fn default() -> Self {
        CiConfig {
            resamples: 10_000,
            seed: 42,
            level: 0.95,
        }
    }
}

/// Settings that determine a report, recorded alongside it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigFingerprint {
    pub matching_policy: String,
    pub anchoring: String,
    pub label_accuracy: String,
    pub degenerate_conventions: String,
    pub bootstrap_method: String,
    pub bootstrap_statistic: String,
    pub bootstrap_z0_ties: String,
    pub bootstrap_quantiles: String,
    pub bootstrap_rng: String,
    pub resamples: usize,
    pub seed: u64,
    pub level: f64,
}

impl ConfigFingerprint {
    pub fn new(ci: &CiConfig) -> Self {
        ConfigFingerprint {
            matching_policy: "optimal one-to-one: max cardinality, then max total overlap, then lexicographically smallest (ref, pred) pairs".into(),
            anchoring: "exact, then normalized (case fold, whitespace collapse, typographic punctuation to ASCII, trailing punctuation stripped), else unanchored".into(),
            label_accuracy: "pooled over matched errors".into(),
            degenerate_conventions: "no predictions: P=1; no reference errors: R=1; P+R=0: F1=0".into(),
            bootstrap_method: "bca".into(),
            bootstrap_statistic: "mean of per-document values".into(),
            bootstrap_z0_ties: "half".into(),
            bootstrap_quantiles: "linear interpolation between order statistics".into(),
            bootstrap_rng: crate::bootstrap::RNG_DESCRIPTION.into(),
            resamples: ci.resamples,
            seed: ci.seed,
            level: ci.level,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport<F = f64> {
    pub config: ConfigFingerprint,
    #[serde(flatten)]
    pub summary: MacroSummary<F>,
    /// `None` when fewer than two documents are available.
    pub ci_precision: Option<ConfidenceInterval<F>>,
    pub ci_recall: Option<ConfidenceInterval<F>>,
    pub ci_f1: Option<ConfidenceInterval<F>>,
    pub scores: Vec<DocumentScore<F>>,
}

impl<F> EvaluationReport<F> {
    pub fn doc_ids(&self) -> BTreeSet<&str> {
        self.scores.iter().map(|s| s.doc_id.as_str()).collect()
    }
}

/// Macro aggregation with BCa intervals over the per-document values.
pub fn aggregate<F>(
    scores: &[DocumentScore<F>],
    ci: &CiConfig,
) -> Result<EvaluationReport<F>, MetricsError>
where
    F: Float + FromPrimitive + ToPrimitive + Debug,
{
    let summary = summarize(scores)?;
    let level = F::from_f64(ci.level).expect("level representable");
    let interval =
        |pick: fn(&DocumentScore<F>) -> F| -> Result<Option<ConfidenceInterval<F>>, MetricsError> {
            if scores.len() < 2 {
                return Ok(None);
            }
            let values: Vec<F> = scores.iter().map(pick).collect();
            Ok(Some(bca_interval(&values, ci.resamples, ci.seed, level)?))
        };
    Ok(EvaluationReport {
        config: ConfigFingerprint::new(ci),
        ci_precision: interval(|s| s.precision)?,
        ci_recall: interval(|s| s.recall)?,
        ci_f1: interval(|s| s.f1)?,
        summary,
        scores: scores.to_vec(),
    })
}

/// One corpus-level metric in two runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricDelta {
    pub metric: String,
    pub a: Option<f64>,
    pub b: Option<f64>,
    /// `b - a`.
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentDelta {
    pub doc_id: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub n_pred: i64,
    pub n_label_correct: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunComparison {
    pub metrics: Vec<MetricDelta>,
    /// Sorted by doc_id.
    pub documents: Vec<DocumentDelta>,
}

impl RunComparison {
    pub fn is_identical(&self) -> bool {
        self.metrics
            .iter()
            .all(|m| m.delta.is_none_or(|d| d == 0.0) && m.a.is_some() == m.b.is_some())
            && self.documents.iter().all(|d| {
                d.precision == 0.0
                    && d.recall == 0.0
                    && d.f1 == 0.0
                    && d.n_pred == 0
                    && d.n_label_correct == 0
            })
    }
}

/// Per-metric and per-document differences between two reports over the same documents.
pub fn compare_runs(
    a: &EvaluationReport<f64>,
    b: &EvaluationReport<f64>,
) -> Result<RunComparison, MetricsError> {
    let ids_a = a.doc_ids();
    let ids_b = b.doc_ids();
    if ids_a != ids_b {
        return Err(MetricsError::DocSetMismatch {
            only_in_a: ids_a.difference(&ids_b).map(|s| s.to_string()).collect(),
            only_in_b: ids_b.difference(&ids_a).map(|s| s.to_string()).collect(),
        });
    }
    let row = |name: &str, x: Option<f64>, y: Option<f64>| MetricDelta {
        metric: name.to_string(),
        a: x,
        b: y,
        delta: x.zip(y).map(|(x, y)| y - x),
    };
    let (sa, sb) = (&a.summary, &b.summary);
    let count = |n: usize| Some(n as f64);
    let metrics = vec![
        row("n_pred", count(sa.total_pred), count(sb.total_pred)),
        row(
            "macro_precision",
            Some(sa.macro_precision),
            Some(sb.macro_precision),
        ),
        row("macro_recall", Some(sa.macro_recall), Some(sb.macro_recall)),
        row("macro_f1", Some(sa.macro_f1), Some(sb.macro_f1)),
        row(
            "pct_correctly_labeled",
            sa.pct_correctly_labeled,
            sb.pct_correctly_labeled,
        ),
        row(
            "false_error_mean_per_doc",
            Some(sa.false_error_mean_per_doc),
            Some(sb.false_error_mean_per_doc),
        ),
        row(
            "false_error_pct_of_pred",
            sa.false_error_pct_of_pred,
            sb.false_error_pct_of_pred,
        ),
    ];
    let mut by_id_b: Vec<&DocumentScore<f64>> = b.scores.iter().collect();
    by_id_b.sort_by(|x, y| x.doc_id.cmp(&y.doc_id));
    let mut by_id_a: Vec<&DocumentScore<f64>> = a.scores.iter().collect();
    by_id_a.sort_by(|x, y| x.doc_id.cmp(&y.doc_id));
    let documents = by_id_a
        .iter()
        .zip(by_id_b.iter())
        .map(|(x, y)| DocumentDelta {
            doc_id: x.doc_id.clone(),
            precision: y.precision - x.precision,
            recall: y.recall - x.recall,
            f1: y.f1 - x.f1,
            n_pred: y.n_pred as i64 - x.n_pred as i64,
            n_label_correct: y.n_label_correct as i64 - x.n_label_correct as i64,
        })
        .collect();
    Ok(RunComparison { metrics, documents })
}
