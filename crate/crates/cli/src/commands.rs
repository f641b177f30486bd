use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use annoteval_core::corpus::{load_corpus, read_predictions, write_predictions_tsv};
use annoteval_core::metrics::CiConfig;
use annoteval_core::{compare_runs, corpus_stats, load_typology, parse_reference_corpus};
use annoteval_core::{
    AnnotatedDocument, CorpusError, EvaluationReport, MtSystem, PredictedAnnotation, Typology,
};
use annoteval_llm::transcript::now_ms;
use annoteval_llm::{
    build_chain, replay, run_batch, AnnotationOutcome, BatchOptions, LlmError, Origin,
    ProviderConfig, RunManifest, TranscriptStore,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::args::{
    AnnotateArgs, CompareArgs, CorpusArgs, EvaluateArgs, PredictionSource, RunConfig, StatsArgs,
};
use crate::error::{diagnostic_line, CliError, Exit};
use crate::pipeline::{evaluate, Evaluation};
use crate::{plot, render};

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn typology(input: &CorpusArgs) -> Result<Typology, CliError> {
    match &input.typology {
        Some(p) => Ok(load_typology(p)?),
        None => Ok(Typology::bundled()),
    }
}

fn corpus(input: &CorpusArgs, typology: &Typology) -> Result<Vec<AnnotatedDocument>, CliError> {
    let mut docs = parse_reference_corpus(&input.corpus, typology)?;
    if docs.is_empty() {
        return Err(CorpusError::EmptyCorpus.into());
    }
    docs.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
    Ok(docs)
}

fn write(path: &Path, contents: &str) -> Result<String, CliError> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))?;
    Ok(sha256_hex(contents.as_bytes()))
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

fn pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("value serializes");
    s.push('\n');
    s
}

pub fn validate(input: &CorpusArgs) -> Result<(), CliError> {
    let typology = typology(input)?;
    let load = load_corpus(&input.corpus, &typology)?;
    for d in &load.diagnostics {
        eprintln!(
            "{}",
            diagnostic_line(
                d.error.kind(),
                &format!("{}: {}", d.path.display(), d.error)
            )
        );
    }
    if load.docs.is_empty() && load.diagnostics.is_empty() {
        return Err(CorpusError::EmptyCorpus.into());
    }
    if !load.diagnostics.is_empty() {
        return Err(CliError::new(
            "ValidationFailed",
            format!(
                "{} problem(s) in {} file(s)",
                load.diagnostics.len(),
                load.files
            ),
            Exit::Validation,
        ));
    }
    let errors: usize = load.docs.iter().map(|d| d.reference_errors.len()).sum();
    println!(
        "ok: {} documents, {} reference errors, {} files",
        load.docs.len(),
        errors,
        load.files
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct StatsOutput {
    all: annoteval_core::CorpusStats,
    by_mt_system: BTreeMap<String, annoteval_core::CorpusStats>,
}

pub fn stats(a: &StatsArgs) -> Result<(), CliError> {
    let typology = typology(&a.input)?;
    let docs = corpus(&a.input, &typology)?;
    let mut groups: BTreeMap<MtSystem, Vec<AnnotatedDocument>> = BTreeMap::new();
    for d in &docs {
        groups
            .entry(d.mt_system.clone())
            .or_default()
            .push(d.clone());
    }
    let out = StatsOutput {
        all: corpus_stats(&docs)?,
        by_mt_system: groups
            .iter()
            .map(|(k, v)| Ok((k.to_string(), corpus_stats(v)?)))
            .collect::<Result<_, CorpusError>>()?,
    };
    if a.json {
        print!("{}", pretty(&out));
        return Ok(());
    }
    if groups.len() > 1 {
        print!("{}", render::stats_block("all", &out.all));
        for (k, s) in &out.by_mt_system {
            println!();
            print!("{}", render::stats_block(k, s));
        }
    } else {
        let title = groups
            .keys()
            .next()
            .map(|k| k.to_string())
            .unwrap_or_else(|| "all".into());
        print!("{}", render::stats_block(&title, &out.all));
    }
    Ok(())
}

/// Per-document line of an annotate manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnnotatedDocRecord {
    pub doc_id: String,
    /// `sent`, `resumed` or `replayed`.
    pub origin: String,
    /// `ok`, or the error kind.
    pub status: String,
    pub n_predictions: usize,
    pub retries: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

/// `manifest.json` of an annotate output directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnnotateManifest {
    pub tool_version: String,
    /// `provider` or `replay`.
    pub mode: String,
    pub config: serde_json::Value,
    #[serde(flatten)]
    pub run: RunManifest,
    pub results: Vec<AnnotatedDocRecord>,
    /// Absent when some document failed.
    pub predictions_file: Option<String>,
    pub predictions_sha256: Option<String>,
}

fn read_annotate_manifest(path: &Path) -> Option<AnnotateManifest> {
    let text = fs::read_to_string(path).ok()?;
    serde_json::from_str(&text).ok()
}

/// Sentence numbers outside the document are dropped, keeping the prediction
/// searchable over the whole text.
fn sanitize_sentences(
    doc: &AnnotatedDocument,
    preds: &mut [PredictedAnnotation],
    notes: &mut Vec<String>,
) {
    for (i, p) in preds.iter_mut().enumerate() {
        if let Some(s) = p.sentence_index {
            if s >= doc.sentences.len() {
                notes.push(format!(
                    "prediction {}: sentence {} does not exist ({} sentences); searching the whole text",
                    i + 1,
                    s + 1,
                    doc.sentences.len()
                ));
                p.sentence_index = None;
            }
        }
    }
}

fn doc_message(doc_id: &str, e: &LlmError) -> String {
    let text = e.to_string();
    if text.contains(doc_id) {
        text
    } else {
        format!("{doc_id}: {text}")
    }
}

pub fn annotate(a: &AnnotateArgs) -> Result<(), CliError> {
    let config = RunConfig::for_annotate(a)?;
    let typology = typology(&a.input)?;
    let docs = corpus(&a.input, &typology)?;
    create_dir(&a.out)?;
    let manifest_path = a.out.join("manifest.json");
    let previous = read_annotate_manifest(&manifest_path);
    let started = now_ms();

    let (mode, run, items): (
        &str,
        RunManifest,
        Vec<(String, Origin, Result<AnnotationOutcome, LlmError>)>,
    ) = match &config.source {
        PredictionSource::Replay(dir) => {
            if !dir.join("transcripts").is_dir() {
                return Err(LlmError::NotFound(format!(
                    "{} holds no transcripts directory",
                    dir.display()
                ))
                .into());
            }
            let store = TranscriptStore::open(dir)?;
            let items: Vec<_> = docs
                .iter()
                .map(|d| (d.doc_id.clone(), Origin::Resumed, replay(&store, &d.doc_id)))
                .collect();
            if let Some(Ok(first)) = items.iter().map(|i| i.2.as_ref()).find(|r| r.is_ok()) {
                if first.transcript.variant != a.variant {
                    return Err(CliError::new(
                        "VariantMismatch",
                        format!(
                            "transcripts use the {} prompt, --variant asks for {}",
                            first.transcript.variant, a.variant
                        ),
                        Exit::Usage,
                    ));
                }
            }
            let source = read_annotate_manifest(&dir.join("manifest.json")).map(|m| m.run);
            let first = items
                .iter()
                .find_map(|i| i.2.as_ref().ok())
                .map(|o| &o.transcript);
            let run = source.unwrap_or_else(|| RunManifest {
                run_id: first.map(|t| t.run_id.clone()).unwrap_or_default(),
                created_ms: started,
                updated_ms: started,
                provider_id: first.map(|t| t.provider_id.clone()).unwrap_or_default(),
                model_id: first.map(|t| t.model_id.clone()).unwrap_or_default(),
                variant: a.variant,
                language: first.map(|t| t.language.clone()).unwrap_or_default(),
                sampling: Default::default(),
                retry_max_attempts: 0,
                retry_backoff_base_ms: 0,
                max_parallel: 1,
                documents: Vec::new(),
            });
            ("replay", run, items)
        }
        PredictionSource::Provider(path) => {
            let cfg = ProviderConfig::load(path)?;
            let provider = cfg.connect()?;
            let manual = a.manual.as_deref();
            let chains = docs
                .iter()
                .map(|d| build_chain(d, &typology, manual, a.variant))
                .collect::<Result<Vec<_>, _>>()?;
            let store = TranscriptStore::open(&a.out)?;
            let run_id = previous
                .as_ref()
                .filter(|m| m.mode == "provider")
                .map(|m| m.run.run_id.clone())
                .unwrap_or_else(|| format!("run-{started}"));
            let options = BatchOptions {
                max_parallel: cfg.max_parallel.max(1),
                force: a.force,
            };
            let batch = run_batch(
                provider.as_ref(),
                &cfg.retry,
                &chains,
                &store,
                &run_id,
                options,
            );
            let run = RunManifest {
                run_id,
                created_ms: previous.as_ref().map_or(started, |m| m.run.created_ms),
                updated_ms: started,
                provider_id: provider.provider_id().to_string(),
                model_id: provider.model_id().to_string(),
                variant: a.variant,
                language: chains
                    .first()
                    .map(|c| c.language.clone())
                    .unwrap_or_default(),
                sampling: cfg.sampling.clone().into_iter().collect(),
                retry_max_attempts: cfg.retry.max_attempts,
                retry_backoff_base_ms: cfg.retry.backoff_base_ms,
                max_parallel: options.max_parallel,
                documents: Vec::new(),
            };
            (
                "provider",
                run,
                batch
                    .into_iter()
                    .map(|b| (b.doc_id, b.origin, b.result))
                    .collect(),
            )
        }
        PredictionSource::File(_) => unreachable!("annotate reads no predictions file"),
    };

    let mut predictions = Vec::new();
    let mut results = Vec::new();
    let mut worst: Option<CliError> = None;
    for (doc, (doc_id, origin, result)) in docs.iter().zip(items) {
        let origin = match (mode, origin) {
            ("replay", _) => "replayed",
            (_, Origin::Sent) => "sent",
            (_, Origin::Resumed) => "resumed",
        };
        match result {
            Ok(outcome) => {
                let mut preds = outcome.predictions;
                let mut notes = outcome.diagnostics;
                sanitize_sentences(doc, &mut preds, &mut notes);
                for n in &notes {
                    log::warn!("{doc_id}: {n}");
                }
                println!("{doc_id}\t{origin}\t{} predictions", preds.len());
                results.push(AnnotatedDocRecord {
                    doc_id,
                    origin: origin.into(),
                    status: "ok".into(),
                    n_predictions: preds.len(),
                    retries: outcome.transcript.retries(),
                    diagnostics: notes,
                });
                predictions.extend(preds);
            }
            Err(e) => {
                let err = CliError::from_llm(&e);
                eprintln!("{}", diagnostic_line(&err.kind, &doc_message(&doc_id, &e)));
                results.push(AnnotatedDocRecord {
                    doc_id,
                    origin: origin.into(),
                    status: err.kind.clone(),
                    n_predictions: 0,
                    retries: 0,
                    diagnostics: vec![e.to_string()],
                });
                if worst
                    .as_ref()
                    .is_none_or(|w| (err.exit as u8) > (w.exit as u8))
                {
                    worst = Some(err);
                }
            }
        }
    }

    let (predictions_file, predictions_sha256) = if worst.is_none() {
        let mut buf = Vec::new();
        write_predictions_tsv(&mut buf, &predictions)?;
        let path = a.out.join("predictions.tsv");
        fs::write(&path, &buf).map_err(|e| CliError::io(&path, e))?;
        (Some("predictions.tsv".to_string()), Some(sha256_hex(&buf)))
    } else {
        (None, None)
    };
    let mut run = run;
    run.updated_ms = now_ms();
    run.documents = docs.iter().map(|d| d.doc_id.clone()).collect();
    let manifest = AnnotateManifest {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        mode: mode.into(),
        config: serde_json::to_value(&config).expect("config serializes"),
        run,
        results,
        predictions_file,
        predictions_sha256,
    };
    write(&manifest_path, &pretty(&manifest))?;
    match worst {
        Some(w) => {
            let failed = manifest.results.iter().filter(|r| r.status != "ok").count();
            Err(CliError::new(
                "AnnotationIncomplete",
                format!(
                    "{failed} of {} documents failed; rerun to resume",
                    manifest.results.len()
                ),
                w.exit,
            ))
        }
        None => Ok(()),
    }
}

#[derive(Debug, Serialize)]
struct OutputFile {
    file: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct EvaluateManifest {
    tool_version: String,
    started_ms: u64,
    finished_ms: u64,
    config: RunConfig,
    corpus_sha256: String,
    predictions_sha256: String,
    n_docs: usize,
    n_predictions: usize,
    outputs: Vec<OutputFile>,
}

/// Loads inputs and runs the evaluation pipeline.
pub fn evaluate_inputs(
    e: &EvaluateArgs,
) -> Result<(Evaluation, Vec<AnnotatedDocument>, Vec<PredictedAnnotation>), CliError> {
    let typology = typology(&e.input)?;
    let docs = corpus(&e.input, &typology)?;
    let preds = read_predictions(&e.predictions)?;
    let ci = CiConfig {
        resamples: e.bootstrap_b,
        seed: e.seed,
        level: e.level,
    };
    let evaluation = evaluate(&docs, &preds, &typology, &ci)?;
    Ok((evaluation, docs, preds))
}

fn run_name(explicit: Option<&str>, dir: &Path) -> String {
    explicit
        .map(str::to_string)
        .or_else(|| dir.file_name().map(|n| n.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "run".into())
}

pub fn evaluate_cmd(e: &EvaluateArgs) -> Result<(), CliError> {
    let config = RunConfig::for_evaluate(e)?;
    let started_ms = now_ms();
    let (evaluation, docs, preds) = evaluate_inputs(e)?;
    let report = &evaluation.report;
    create_dir(&e.out)?;
    let name = run_name(e.name.as_deref(), &e.out);
    let mut outputs = Vec::new();
    let mut emit = |file: &str, contents: String| -> Result<(), CliError> {
        let sha256 = write(&e.out.join(file), &contents)?;
        outputs.push(OutputFile {
            file: file.into(),
            sha256,
        });
        Ok(())
    };
    if e.formats.json {
        emit("report.json", pretty(report))?;
    }
    if e.formats.md {
        emit("report.md", render::report_markdown(&name, report))?;
    }
    if e.formats.csv {
        let csv = render::per_document_csv(report)
            .map_err(|err| CliError::new("IoError", err.to_string(), Exit::Validation))?;
        emit("per_document.csv", csv)?;
    }
    if e.formats.svg {
        emit(
            "distribution.svg",
            plot::distribution_svg(&[(&name, report)]),
        )?;
    }
    if e.trace {
        emit("trace.json", pretty(&evaluation.traces))?;
    }
    let canonical: String = docs
        .iter()
        .map(annoteval_core::corpus::write_document)
        .collect();
    let pred_bytes = fs::read(&e.predictions).map_err(|err| CliError::io(&e.predictions, err))?;
    let manifest = EvaluateManifest {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        started_ms,
        finished_ms: now_ms(),
        config,
        corpus_sha256: sha256_hex(canonical.as_bytes()),
        predictions_sha256: sha256_hex(&pred_bytes),
        n_docs: docs.len(),
        n_predictions: preds.len(),
        outputs,
    };
    write(&e.out.join("manifest.json"), &pretty(&manifest))?;
    print!("{}", render::results_table(&[(&name, report)]));
    Ok(())
}

fn report_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join("report.json")
    } else {
        p.to_path_buf()
    }
}

pub fn load_report(p: &Path) -> Result<EvaluationReport<f64>, CliError> {
    let path = report_path(p);
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| {
        CliError::new(
            "FormatError",
            format!("{}: {e}", path.display()),
            Exit::Validation,
        )
    })
}

fn report_name(p: &Path) -> String {
    let dir = if p.is_dir() { Some(p) } else { p.parent() };
    dir.and_then(|d| d.file_name())
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| p.display().to_string())
}

pub fn compare(c: &CompareArgs) -> Result<(), CliError> {
    let a = load_report(&c.report_a)?;
    let b = load_report(&c.report_b)?;
    let (mut na, mut nb) = (report_name(&c.report_a), report_name(&c.report_b));
    if na == nb {
        na.push_str(" (A)");
        nb.push_str(" (B)");
    }
    let comparison = compare_runs(&a, &b)?;
    let table = render::comparison_markdown((&na, &nb), &comparison);
    print!("{table}");
    if let Some(out) = &c.out {
        create_dir(out)?;
        let runs = [(na.as_str(), &a), (nb.as_str(), &b)];
        let md = format!(
            "# Comparison\n\n{}\n{}",
            render::results_table(&runs),
            table
        );
        write(&out.join("comparison.md"), &md)?;
        write(&out.join("comparison.json"), &pretty(&comparison))?;
        write(
            &out.join("distribution.svg"),
            &plot::distribution_svg(&runs),
        )?;
    }
    Ok(())
}
