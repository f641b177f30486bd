//! Reading and writing reference corpora and prediction files.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::text::{cp_len, split_sentences, CharIndex, Span};
use super::{
    AnchorStatus, AnnotatedDocument, CorpusError, MtSystem, PredictedAnnotation, ReferenceError,
};
use crate::typology::Typology;

/// On-disk form of one reference error.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorRecord {
    pub start: usize,
    pub end: usize,
    pub labels: Vec<String>,
}

/// On-disk form of one annotated translation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DocumentFile {
    pub doc_id: String,
    pub mt_system: MtSystem,
    pub source_text: String,
    pub target_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sentences: Option<Vec<Span>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_sentences: Option<Vec<Span>>,
    #[serde(default)]
    pub errors: Vec<ErrorRecord>,
}

impl From<&AnnotatedDocument> for DocumentFile {
    fn from(doc: &AnnotatedDocument) -> DocumentFile {
        DocumentFile {
            doc_id: doc.doc_id.clone(),
            mt_system: doc.mt_system.clone(),
            source_text: doc.source_text.clone(),
            target_text: doc.target_text.clone(),
            sentences: Some(doc.sentences.clone()),
            source_sentences: doc.source_sentences.clone(),
            errors: doc
                .reference_errors
                .iter()
                .map(|e| ErrorRecord {
                    start: e.span.start,
                    end: e.span.end,
                    labels: e.labels.clone(),
                })
                .collect(),
        }
    }
}

/// A problem found while loading a corpus, tied to the file it came from.
#[derive(Debug)]
pub struct Diagnostic {
    pub path: PathBuf,
    pub error: CorpusError,
}

/// Outcome of loading a corpus: the valid documents plus every problem found.
#[derive(Debug, Default)]
pub struct CorpusLoad {
    pub docs: Vec<AnnotatedDocument>,
    pub diagnostics: Vec<Diagnostic>,
    pub files: usize,
}

fn validate_sentences(
    doc: &str,
    text: &str,
    spans: &[Span],
    check_cover: bool,
    errors: &mut Vec<CorpusError>,
) {
    let len = cp_len(text);
    let chars: Vec<char> = text.chars().collect();
    let mut bad = |index: usize, reason: &str| {
        errors.push(CorpusError::InvalidSentences {
            doc: doc.to_string(),
            index,
            reason: reason.to_string(),
        })
    };
    let mut prev_end = 0;
    for (i, s) in spans.iter().enumerate() {
        if s.is_empty() || s.end > len {
            bad(i, "empty or out of bounds");
            return;
        }
        if s.start < prev_end {
            bad(i, "overlaps or precedes the previous sentence");
            return;
        }
        if check_cover && chars[prev_end..s.start].iter().any(|c| !c.is_whitespace()) {
            bad(i, "non-whitespace text before this sentence is not covered");
            return;
        }
        prev_end = s.end;
    }
    if check_cover && chars[prev_end..].iter().any(|c| !c.is_whitespace()) {
        bad(spans.len(), "trailing text is not covered by any sentence");
    }
}

/// Validates a document record against its invariants and the typology.
/// Returns every violation found.
pub fn validate_document(
    file: DocumentFile,
    typology: &Typology,
) -> Result<AnnotatedDocument, Vec<CorpusError>> {
    let doc_id = file.doc_id.clone();
    let len = cp_len(&file.target_text);
    let mut problems = Vec::new();
    let mut errors: Vec<ReferenceError> = Vec::new();
    let mut seen = HashSet::new();
    for (index, rec) in file.errors.iter().enumerate() {
        let span = Span::new(rec.start, rec.end);
        if span.is_empty() || span.end > len {
            problems.push(CorpusError::InvalidSpan {
                doc: doc_id.clone(),
                index,
            });
            continue;
        }
        if rec.labels.is_empty() {
            problems.push(CorpusError::EmptyLabels {
                doc: doc_id.clone(),
                index,
            });
            continue;
        }
        let mut labels: Vec<String> = Vec::new();
        let mut ok = true;
        for raw in &rec.labels {
            match typology.canonical_code(raw) {
                Ok(code) => {
                    if !labels.iter().any(|l| l == code) {
                        labels.push(code.to_string());
                    }
                }
                Err(source) => {
                    problems.push(CorpusError::UnknownLabel {
                        doc: doc_id.clone(),
                        index,
                        source,
                    });
                    ok = false;
                }
            }
        }
        if !ok {
            continue;
        }
        if !seen.insert(span) {
            problems.push(CorpusError::DuplicateError {
                doc: doc_id.clone(),
                index,
            });
            continue;
        }
        errors.push(ReferenceError { span, labels });
    }
    errors.sort_by_key(|e| e.span);

    let sentences = match file.sentences {
        Some(s) => {
            validate_sentences(&doc_id, &file.target_text, &s, true, &mut problems);
            s
        }
        None => split_sentences(&file.target_text),
    };
    if let Some(src) = &file.source_sentences {
        if src.len() != sentences.len() {
            problems.push(CorpusError::InvalidSentences {
                doc: doc_id.clone(),
                index: src.len().min(sentences.len()),
                reason: format!(
                    "{} source sentences for {} target sentences",
                    src.len(),
                    sentences.len()
                ),
            });
        } else {
            validate_sentences(&doc_id, &file.source_text, src, false, &mut problems);
        }
    }

    if !problems.is_empty() {
        return Err(problems);
    }
    Ok(AnnotatedDocument {
        doc_id,
        mt_system: file.mt_system,
        source_text: file.source_text,
        target_text: file.target_text,
        sentences,
        source_sentences: file.source_sentences,
        reference_errors: errors,
    })
}

fn collect_files(path: &Path, out: &mut Vec<PathBuf>) -> Result<(), CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    };
    if path.is_dir() {
        let mut entries: Vec<PathBuf> = std::fs::read_dir(path)
            .map_err(io_err)?
            .map(|e| e.map(|e| e.path()))
            .collect::<Result<_, _>>()
            .map_err(io_err)?;
        entries.sort();
        for entry in entries {
            if entry.is_dir() {
                collect_files(&entry, out)?;
            } else if matches!(
                entry.extension().and_then(|e| e.to_str()),
                Some("json") | Some("jsonl")
            ) {
                out.push(entry);
            }
        }
        Ok(())
    } else if path.exists() {
        out.push(path.to_path_buf());
        Ok(())
    } else {
        Err(io_err(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            "no such file or directory",
        )))
    }
}

fn read_records(path: &Path) -> Result<Vec<DocumentFile>, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let fmt_err = |e: serde_json::Error| CorpusError::Format {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    if path.extension().and_then(|e| e.to_str()) == Some("jsonl") {
        return text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(fmt_err))
            .collect();
    }
    let value: serde_json::Value = serde_json::from_str(&text).map_err(fmt_err)?;
    if value.is_array() {
        serde_json::from_value(value).map_err(fmt_err)
    } else {
        Ok(vec![serde_json::from_value(value).map_err(fmt_err)?])
    }
}

/// Loads every document under `path`, collecting all diagnostics instead of
/// stopping at the first.
pub fn load_corpus(path: impl AsRef<Path>, typology: &Typology) -> Result<CorpusLoad, CorpusError> {
    let mut files = Vec::new();
    collect_files(path.as_ref(), &mut files)?;
    let mut load = CorpusLoad {
        files: files.len(),
        ..CorpusLoad::default()
    };
    let mut ids = HashSet::new();
    for file in files {
        let records = match read_records(&file) {
            Ok(r) => r,
            Err(error) => {
                load.diagnostics.push(Diagnostic { path: file, error });
                continue;
            }
        };
        for rec in records {
            if !ids.insert(rec.doc_id.clone()) {
                load.diagnostics.push(Diagnostic {
                    path: file.clone(),
                    error: CorpusError::DuplicateDocId {
                        doc: rec.doc_id.clone(),
                    },
                });
                continue;
            }
            match validate_document(rec, typology) {
                Ok(doc) => load.docs.push(doc),
                Err(errors) => {
                    load.diagnostics
                        .extend(errors.into_iter().map(|error| Diagnostic {
                            path: file.clone(),
                            error,
                        }))
                }
            }
        }
    }
    Ok(load)
}

/// Loads and validates a corpus; fails on the first problem.
pub fn parse_reference_corpus(
    path: impl AsRef<Path>,
    typology: &Typology,
) -> Result<Vec<AnnotatedDocument>, CorpusError> {
    let load = load_corpus(path, typology)?;
    match load.diagnostics.into_iter().next() {
        Some(d) => Err(d.error),
        None => Ok(load.docs),
    }
}

/// Serializes a document to its JSON file form.
pub fn write_document(doc: &AnnotatedDocument) -> String {
    let mut s =
        serde_json::to_string_pretty(&DocumentFile::from(doc)).expect("document serializes");
    s.push('\n');
    s
}

/// Builds a document from inline markup: `[erroneous text]{CODE, CODE}`.
/// `\[`, `\]`, `\{`, `\}` and `\\` escape literal characters. Spans cannot nest.
pub fn import_inline(
    doc_id: &str,
    mt_system: MtSystem,
    source_text: &str,
    marked_target: &str,
    typology: &Typology,
) -> Result<AnnotatedDocument, CorpusError> {
    let bad = |msg: String| CorpusError::InlineMarkup(format!("{doc_id}: {msg}"));
    let mut plain = String::new();
    let mut plain_len = 0usize;
    let mut errors = Vec::new();
    let mut open: Option<usize> = None;
    let mut chars = marked_target.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '\\' => {
                let next = chars.next().ok_or_else(|| bad("dangling escape".into()))?;
                plain.push(next);
                plain_len += 1;
            }
            '[' => {
                if open.is_some() {
                    return Err(bad(format!("nested span at offset {plain_len}")));
                }
                open = Some(plain_len);
            }
            ']' => {
                let start = open.take().ok_or_else(|| bad("unmatched ']'".into()))?;
                if chars.next() != Some('{') {
                    return Err(bad(format!(
                        "span at {start} is not followed by '{{codes}}'"
                    )));
                }
                let mut codes = String::new();
                loop {
                    match chars.next() {
                        Some('}') => break,
                        Some(ch) => codes.push(ch),
                        None => return Err(bad(format!("unterminated label list at {start}"))),
                    }
                }
                let labels: Vec<String> = codes
                    .split(',')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect();
                errors.push(ErrorRecord {
                    start,
                    end: plain_len,
                    labels,
                });
            }
            _ => {
                plain.push(c);
                plain_len += 1;
            }
        }
    }
    if open.is_some() {
        return Err(bad("unclosed '['".into()));
    }
    let file = DocumentFile {
        doc_id: doc_id.to_string(),
        mt_system,
        source_text: source_text.to_string(),
        target_text: plain,
        sentences: None,
        source_sentences: None,
        errors,
    };
    validate_document(file, typology).map_err(|mut e| e.remove(0))
}

const TSV_HEADER: [&str; 5] = [
    "doc_id",
    "sentence_index",
    "surface",
    "label",
    "explanation",
];

/// Writes predictions as tab-separated values with the standard header.
pub fn write_predictions_tsv<W: Write>(
    writer: W,
    preds: &[PredictedAnnotation],
) -> Result<(), CorpusError> {
    let to_err = |e: csv::Error| CorpusError::Format {
        path: "<predictions>".into(),
        message: e.to_string(),
    };
    let mut w = csv::WriterBuilder::new()
        .delimiter(b'\t')
        .quote_style(csv::QuoteStyle::Necessary)
        .from_writer(writer);
    w.write_record(TSV_HEADER).map_err(to_err)?;
    for p in preds {
        let sentence = p.sentence_index.map(|i| i.to_string()).unwrap_or_default();
        w.write_record([
            p.doc_id.as_str(),
            sentence.as_str(),
            p.surface.as_str(),
            p.label.as_str(),
            p.explanation.as_deref().unwrap_or(""),
        ])
        .map_err(to_err)?;
    }
    w.flush().map_err(|source| CorpusError::Io {
        path: "<predictions>".into(),
        source,
    })?;
    Ok(())
}

fn parse_tsv<R: Read>(reader: R, path: &str) -> Result<Vec<PredictedAnnotation>, CorpusError> {
    let fmt = |message: String| CorpusError::Format {
        path: path.to_string(),
        message,
    };
    let mut r = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .flexible(true)
        .from_reader(reader);
    let headers = r.headers().map_err(|e| fmt(e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let (Some(doc_col), Some(surface_col), Some(label_col)) =
        (col("doc_id"), col("surface"), col("label"))
    else {
        return Err(fmt(format!(
            "header must contain {}",
            TSV_HEADER.join(", ")
        )));
    };
    let sentence_col = col("sentence_index");
    let explanation_col = col("explanation");
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| fmt(e.to_string()))?;
        let get = |c: Option<usize>| c.and_then(|c| rec.get(c)).unwrap_or("");
        let sentence = get(sentence_col).trim();
        let sentence_index =
            if sentence.is_empty() {
                None
            } else {
                Some(sentence.parse::<usize>().map_err(|_| {
                    fmt(format!("row {}: bad sentence_index {sentence:?}", line + 2))
                })?)
            };
        let explanation = get(explanation_col);
        out.push(PredictedAnnotation {
            doc_id: get(Some(doc_col)).to_string(),
            sentence_index,
            surface: get(Some(surface_col)).to_string(),
            label: get(Some(label_col)).to_string(),
            explanation: (!explanation.is_empty()).then(|| explanation.to_string()),
            anchor: None,
            anchor_status: AnchorStatus::Unanchored,
        });
    }
    Ok(out)
}

/// Reads a predictions file: `.json` (array), `.jsonl`, or tab-separated
/// values otherwise.
pub fn read_predictions(path: impl AsRef<Path>) -> Result<Vec<PredictedAnnotation>, CorpusError> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: shown.clone(),
        source,
    })?;
    let fmt = |e: serde_json::Error| CorpusError::Format {
        path: shown.clone(),
        message: e.to_string(),
    };
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => serde_json::from_str(&text).map_err(fmt),
        Some("jsonl") => text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(fmt))
            .collect(),
        _ => parse_tsv(text.as_bytes(), &shown),
    }
}

impl AnnotatedDocument {
    /// Index for slicing the target text by code point.
    pub fn target_index(&self) -> CharIndex {
        CharIndex::new(&self.target_text)
    }
}
