//! Evaluation of LLM-produced translation error annotations against expert
//! reference annotations.
//!
//! The crate is organised bottom-up:
//!
//! - [`typology`]: the hierarchical error-category tree and label resolution.
//! - [`corpus`]: annotated documents, predicted annotations, corpus statistics,
//!   sentence splitting and anchoring of predicted surfaces to spans.
//! - [`matching`]: one-to-one overlap matching between reference and predicted
//!   error spans.
//! - [`metrics`]: per-document precision/recall/F1 and macro aggregation.
//! - [`bootstrap`]: BCa bootstrap confidence intervals.
//!
//! Numeric code in [`metrics`] and [`bootstrap`] is generic over the scalar
//! type. The aliases below fix the common instantiations.

pub mod bootstrap;
pub mod corpus;
pub mod matching;
pub mod metrics;
pub mod normal;
pub mod typology;

pub use bootstrap::{bca_interval, CiMethod, ConfidenceInterval};
pub use corpus::{
    anchor_predictions, corpus_stats, parse_reference_corpus, split_sentences, AnchorStatus,
    AnnotatedDocument, CorpusError, CorpusStats, MtSystem, PredictedAnnotation, ReferenceError,
    Span,
};
pub use matching::{match_document, overlaps, MatchPair, MatchResult};
pub use metrics::{aggregate, compare_runs, score_document, DocumentScore, EvaluationReport};
pub use typology::{load_typology, ErrorCategory, Typology, TypologyError};

/// Exact rational scalar used to check fixtures without rounding.
pub type Rational = num_rational::Ratio<i64>;

/// Per-document score with exact rational arithmetic.
pub type ExactDocumentScore = metrics::DocumentScore<Rational>;
/// Macro summary with exact rational arithmetic.
pub type ExactSummary = metrics::MacroSummary<Rational>;

/// Single-precision instantiations.
pub type DocumentScoreF32 = metrics::DocumentScore<f32>;
pub type EvaluationReportF32 = metrics::EvaluationReport<f32>;
pub type ConfidenceIntervalF32 = bootstrap::ConfidenceInterval<f32>;
