//! The `xlproject` command line.
//!
//! Each subcommand reads and writes only the files named by its flags (plus
//! the documented sidecars next to them) and stamps every output with
//! provenance: the command, a hash of the semantic settings, the seed, and a
//! SHA-256 of each input file.

mod commands;
mod config;
mod llm;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{CorpusFormat, Language};
use crate::model::{Schedule, Task};
use crate::{Error, ErrorCategory};

pub use config::{BackendKind, CombineSection, FileConfig, MtSection, SplitSection, TrainSection};
pub use llm::{parse_llm_response, parse_response_file, LlmParseError, ParseFailure, ParsedLabel};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("missing setting: {0}")]
    Missing(String),
}

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  2  configuration error (bad flag, config file or setting)
  3  data error (missing or malformed input)
  4  translation backend failure
  5  internal error";

#[derive(Debug, Parser)]
#[command(name = "xlproject", version, about = "Cross-lingual emotion and trigger-word corpus toolkit", after_help = EXIT_CODES)]
pub struct Cli {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Corpus file format. Inferred from each file's extension when omitted.
    #[arg(long, global = true, value_enum)]
    pub format: Option<CorpusFormat>,
    /// Random seed (default 0).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Split a corpus into training and validation parts.
    Split(SplitArgs),
    /// Translate an English corpus and project trigger labels through markers.
    Project(ProjectArgs),
    /// Build trigger-switched corpora from a source corpus and its projection.
    Switch(SwitchArgs),
    /// Concatenate source and derived corpora into one training set.
    Combine(CombineArgs),
    /// Train an emotion or trigger classifier.
    Train(TrainArgs),
    /// Run one or more trained classifiers over a corpus.
    Predict(PredictArgs),
    /// Score predictions against a gold corpus.
    Evaluate(EvaluateArgs),
    /// Extract emotion labels from raw LLM answers.
    ParseLlm(ParseLlmArgs),
    /// Write the deterministic synthetic fixture corpus.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Training part.
    #[arg(long)]
    pub output: PathBuf,
    /// Validation part.
    #[arg(long)]
    pub validation_output: PathBuf,
    /// Validation share, strictly between 0 and 1 (default 0.1).
    #[arg(long)]
    pub fraction: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Projected corpus. Discards go to `<output>.discards.jsonl` and span
    /// alignments to `<output>.alignments.jsonl`.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value = "en")]
    pub src: Language,
    #[arg(long)]
    pub tgt: Language,
    #[arg(long, value_enum)]
    pub backend: Option<BackendKind>,
    /// Marker pairs, e.g. "[] {}" or "default".
    #[arg(long)]
    pub scheme: Option<String>,
    /// Remote service URL.
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Word list for the mock backend (`src<TAB>tgt` or `lang<TAB>src<TAB>tgt`);
    /// the synthetic fixture vocabulary is used when omitted.
    #[arg(long)]
    pub dictionary: Option<PathBuf>,
    /// Make the mock backend drop every marker symbol.
    #[arg(long)]
    pub drop_markers: bool,
    /// Translation cache directory (default `.xlproject-cache`).
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    /// Concurrent backend requests (default 4).
    #[arg(long)]
    pub parallelism: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SwitchArgs {
    /// Original English corpus.
    #[arg(long)]
    pub source: PathBuf,
    /// Projected corpus.
    #[arg(long)]
    pub translated: PathBuf,
    /// Span alignments; defaults to `<translated>.alignments.jsonl` when it
    /// exists, otherwise trigger runs are paired by position.
    #[arg(long)]
    pub alignments: Option<PathBuf>,
    /// English host sentences with translated triggers.
    #[arg(long)]
    pub output_st: PathBuf,
    /// Translated host sentences with English triggers.
    #[arg(long)]
    pub output_ts: PathBuf,
}

#[derive(Debug, Args)]
pub struct CombineArgs {
    /// Datasets to include, e.g. "D_S+D_T+D_St".
    #[arg(long)]
    pub combine: Option<String>,
    /// `TAG=PATH` for each dataset, e.g. `D_T=es.jsonl`.
    #[arg(long = "input", value_parser = parse_tagged_path, required = true)]
    pub inputs: Vec<(String, PathBuf)>,
    #[arg(long)]
    pub output: PathBuf,
}

fn parse_tagged_path(s: &str) -> Result<(String, PathBuf), String> {
    let (tag, path) = s
        .split_once('=')
        .ok_or_else(|| format!("expected TAG=PATH, got {s:?}"))?;
    Ok((tag.to_string(), PathBuf::from(path)))
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Checkpoint path. The training report goes to `<output>.report.json`.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_enum)]
    pub task: Task,
    /// Corpus used for epoch selection.
    #[arg(long)]
    pub validation: Option<PathBuf>,
    /// One of 2e-6, 2e-5, 5e-5, 2e-4 (default 2e-4).
    #[arg(long)]
    pub lr: Option<f64>,
    /// Default 30, or 5 with an adapter.
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Train a low-rank adapter of this rank (default rank 64 when only
    /// `--lora-alpha` is given).
    #[arg(long)]
    pub lora_r: Option<usize>,
    #[arg(long)]
    pub lora_alpha: Option<f64>,
    #[arg(long, value_enum)]
    pub schedule: Option<Schedule>,
    /// Feature space size as a power of two (default 18).
    #[arg(long)]
    pub feature_bits: Option<u32>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    /// Checkpoint to extend with an adapter.
    #[arg(long)]
    pub base: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Checkpoint; give one emotion and one trigger model to predict both.
    #[arg(long = "model", required = true)]
    pub models: Vec<PathBuf>,
    #[arg(long)]
    pub input: PathBuf,
    /// Predictions as JSON lines.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Gold corpus.
    #[arg(long, alias = "gold")]
    pub input: PathBuf,
    #[arg(long)]
    pub predictions: PathBuf,
    /// Metrics report (JSON).
    #[arg(long)]
    pub output: PathBuf,
    /// Also write the confusion matrix as CSV.
    #[arg(long)]
    pub confusion_csv: Option<PathBuf>,
    /// Row-normalize the CSV confusion matrix.
    #[arg(long)]
    pub normalize: bool,
}

#[derive(Debug, Args)]
pub struct ParseLlmArgs {
    /// `id<TAB>response` lines.
    #[arg(long)]
    pub input: PathBuf,
    /// Predictions as JSON lines; failures go to `<output>.errors.tsv`.
    #[arg(long)]
    pub output: PathBuf,
    /// Map unparseable responses to Neutral instead of leaving them out.
    #[arg(long)]
    pub fallback_neutral: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub count: usize,
    #[arg(long, default_value = "syn")]
    pub prefix: String,
    /// Also write a mock-backend dictionary for these languages.
    #[arg(long)]
    pub dictionary_output: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "nl,ru,es,fr")]
    pub langs: Vec<Language>,
}

/// Provenance shared by all outputs of one invocation.
#[derive(Debug, Clone)]
pub(crate) struct RunInfo {
    command: &'static str,
    settings: serde_json::Value,
    seed: u64,
    inputs: Vec<(String, String)>,
}

impl RunInfo {
    pub(crate) fn new(command: &'static str, seed: u64) -> Self {
        RunInfo {
            command,
            settings: serde_json::Value::Null,
            seed,
            inputs: Vec::new(),
        }
    }

    pub(crate) fn settings(mut self, settings: serde_json::Value) -> Self {
        self.settings = settings;
        self
    }

    /// Records the SHA-256 of an input file under `role`.
    pub(crate) fn input(&mut self, role: &str, path: &Path) -> Result<(), Error> {
        let bytes = std::fs::read(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        self.inputs
            .push((role.to_string(), hex::encode(Sha256::digest(&bytes))));
        Ok(())
    }

    pub(crate) fn config_hash(&self) -> String {
        // serde_json maps keep keys sorted, so this is canonical
        let canonical = serde_json::to_vec(&self.settings).expect("settings serialize");
        hex::encode(Sha256::digest(&canonical))
    }

    pub(crate) fn provenance(&self) -> BTreeMap<String, String> {
        let mut out = BTreeMap::from([
            ("command".to_string(), self.command.to_string()),
            ("config_hash".to_string(), self.config_hash()),
            ("seed".to_string(), self.seed.to_string()),
        ]);
        for (role, hash) in &self.inputs {
            out.insert(format!("input.{role}.sha256"), hash.clone());
        }
        out
    }
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Result<(), Error> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let ctx = commands::Context {
        format: cli.format.or(file.format),
        seed: cli.seed.or(file.seed).unwrap_or(0),
        file,
    };
    match cli.command {
        Command::Split(args) => commands::split(&ctx, args),
        Command::Project(args) => commands::project(&ctx, args),
        Command::Switch(args) => commands::switch(&ctx, args),
        Command::Combine(args) => commands::combine(&ctx, args),
        Command::Train(args) => commands::train(&ctx, args),
        Command::Predict(args) => commands::predict(&ctx, args),
        Command::Evaluate(args) => commands::evaluate(&ctx, args),
        Command::ParseLlm(args) => commands::parse_llm(&ctx, args),
        Command::Synth(args) => commands::synth(&ctx, args),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
/// Errors are printed to stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ErrorCategory::Config.exit_code()
            } else {
                0
            };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.category().exit_code()
        }
    }
}
