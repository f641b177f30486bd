use std::path::PathBuf;
use std::str::FromStr;

use annoteval_llm::PromptVariant;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "annoteval",
    version,
    about = "Score LLM translation-error annotations against expert references"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a reference corpus against every format and typology invariant.
    Validate(ValidateArgs),
    /// Print descriptive statistics of a reference corpus.
    Stats(StatsArgs),
    /// Produce predictions with a model, or from stored transcripts.
    Annotate(AnnotateArgs),
    /// Score predictions against the references and write reports.
    Evaluate(EvaluateArgs),
    /// Show the differences between two evaluation reports.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    /// Corpus file or directory of .json/.jsonl documents.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Typology JSON; the bundled typology when omitted.
    #[arg(long)]
    pub typology: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub input: CorpusArgs,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[command(flatten)]
    pub input: CorpusArgs,
    /// Print JSON instead of text.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct AnnotateArgs {
    #[command(flatten)]
    pub input: CorpusArgs,
    /// Provider configuration (JSON).
    #[arg(long, conflicts_with = "replay")]
    pub provider_config: Option<PathBuf>,
    /// Run directory of stored transcripts to re-parse instead of calling a provider.
    #[arg(long)]
    pub replay: Option<PathBuf>,
    #[arg(long, default_value = "long")]
    pub variant: PromptVariant,
    /// Annotation manual attached to the first message.
    #[arg(long)]
    pub manual: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Re-send documents that already have a complete transcript.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub input: CorpusArgs,
    /// Predictions file (.tsv, .json or .jsonl).
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    pub bootstrap_b: usize,
    #[arg(long)]
    pub seed: u64,
    /// Confidence level of the intervals.
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated subset of json,md,csv,svg.
    #[arg(long, default_value = "json,md,csv,svg")]
    pub formats: Formats,
    /// Run name used in the Markdown table and the plot.
    #[arg(long)]
    pub name: Option<String>,
    /// Also write anchoring and matching details per document.
    #[arg(long)]
    pub trace: bool,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// First report (report.json or the directory holding it).
    pub report_a: PathBuf,
    /// Second report.
    pub report_b: PathBuf,
    /// Also write comparison.md and a side-by-side plot here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Report files `evaluate` may write.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Formats {
    pub json: bool,
    pub md: bool,
    pub csv: bool,
    pub svg: bool,
}

impl FromStr for Formats {
    type Err = String;

    fn from_str(s: &str) -> Result<Formats, String> {
        let mut f = Formats {
            json: false,
            md: false,
            csv: false,
            svg: false,
        };
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part.to_ascii_lowercase().as_str() {
                "json" => f.json = true,
                "md" | "markdown" => f.md = true,
                "csv" => f.csv = true,
                "svg" => f.svg = true,
                other => {
                    return Err(format!(
                        "unknown format {other:?} (expected json, md, csv, svg)"
                    ))
                }
            }
        }
        if !(f.json || f.md || f.csv || f.svg) {
            return Err("no report format selected".into());
        }
        Ok(f)
    }
}

/// Where predictions come from in an annotate run.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionSource {
    Provider(PathBuf),
    Replay(PathBuf),
    File(PathBuf),
}

/// Settings of one annotate or evaluate invocation, as recorded in its manifest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub corpus: PathBuf,
    pub typology: Option<PathBuf>,
    pub source: PredictionSource,
    pub variant: Option<PromptVariant>,
    pub bootstrap_b: Option<usize>,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub formats: Option<Formats>,
}

impl RunConfig {
    pub fn for_annotate(a: &AnnotateArgs) -> Result<RunConfig, CliError> {
        let source = match (&a.provider_config, &a.replay) {
            (Some(p), None) => PredictionSource::Provider(p.clone()),
            (None, Some(r)) => PredictionSource::Replay(r.clone()),
            _ => {
                return Err(CliError::usage(
                    "annotate needs exactly one of --provider-config or --replay",
                ))
            }
        };
        Ok(RunConfig {
            corpus: a.input.corpus.clone(),
            typology: a.input.typology.clone(),
            source,
            variant: Some(a.variant),
            bootstrap_b: None,
            seed: None,
            out: a.out.clone(),
            formats: None,
        })
    }

    pub fn for_evaluate(e: &EvaluateArgs) -> Result<RunConfig, CliError> {
        if !(e.level > 0.0 && e.level < 1.0) {
            return Err(CliError::usage(format!(
                "--level must lie in (0, 1), got {}",
                e.level
            )));
        }
        Ok(RunConfig {
            corpus: e.input.corpus.clone(),
            typology: e.input.typology.clone(),
            source: PredictionSource::File(e.predictions.clone()),
            variant: None,
            bootstrap_b: Some(e.bootstrap_b),
            seed: Some(e.seed),
            out: e.out.clone(),
            formats: Some(e.formats),
        })
    }
}
