//! The `nmt` command line: align, stats, split, train, translate, evaluate
//! and rerun.
//!
//! Every command that writes files also writes a JSON run manifest holding
//! the fully resolved arguments, so `nmt rerun <manifest>` reproduces the
//! outputs.

mod commands;
mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::align::AlignError;
use crate::corpus::CorpusError;
use crate::eval::EvalError;
use crate::nn::NnError;
use crate::text::TextError;
use crate::train::TrainError;

pub use commands::{
    cmd_align, cmd_evaluate, cmd_rerun, cmd_split, cmd_stats, cmd_train, cmd_translate, CHECKPOINT_FILE,
    resolve_model_config, resolve_training_config, Translator, MANIFEST_FILE, SRC_VOCAB_FILE, TGT_VOCAB_FILE,
    TRAIN_LOG_FILE,
};
pub use manifest::{RunManifest, TOOL_NAME};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "nmt", version, about = "Bitext alignment, LSTM translation models and BLEU evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
pub enum Command {
    /// Align two pre-split, one-sentence-per-line files.
    Align(AlignArgs),
    /// Token, length, vocabulary and sentence counts per domain and side.
    Stats(StatsArgs),
    /// Seeded train/validation split of a bitext.
    Split(SplitArgs),
    /// Train an encoder-decoder model.
    Train(TrainArgs),
    /// Greedy translation of one sentence per line.
    Translate(TranslateArgs),
    /// Smoothed BLEU-1..4 of hypotheses against references.
    Evaluate(EvaluateArgs),
    /// Re-run the command recorded in a run manifest.
    Rerun(RerunArgs),
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct AlignArgs {
    pub src: PathBuf,
    pub tgt: PathBuf,
    /// Tab-separated bilingual dictionary, one `source<TAB>target` per line.
    #[arg(long)]
    pub dict: Option<PathBuf>,
    /// Weight of the dictionary score.
    #[arg(long, visible_alias = "lambda", default_value_t = 1.5)]
    pub dict_weight: f64,
    #[arg(long, default_value_t = 1.0)]
    pub mean_length_ratio: f64,
    #[arg(long, default_value_t = 6.8)]
    pub length_variance: f64,
    #[arg(long, default_value_t = 4_000_000)]
    pub max_cells: usize,
    /// Keep only 1-1 beads in the extracted pairs.
    #[arg(long)]
    pub only_1_1: bool,
    /// Output directory for the ladder, the aligned pairs and the manifest.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct StatsArgs {
    pub src: PathBuf,
    pub tgt: PathBuf,
    #[arg(long)]
    pub domain: Option<String>,
    #[arg(long, default_value = "fr")]
    pub src_lang: String,
    #[arg(long, default_value = "wo")]
    pub tgt_lang: String,
    #[arg(long)]
    pub lowercase: bool,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SplitArgs {
    pub src: PathBuf,
    pub tgt: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Training share as `p/q` or a decimal.
    #[arg(long, visible_alias = "fraction", default_value = "1/2")]
    pub train_fraction: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    pub train_src: PathBuf,
    pub train_tgt: PathBuf,
    /// Explicit validation files; otherwise the training files are split.
    #[arg(long, requires = "valid_tgt")]
    pub valid_src: Option<PathBuf>,
    #[arg(long, requires = "valid_src")]
    pub valid_tgt: Option<PathBuf>,
    /// Training share when splitting, as `p/q` or a decimal.
    #[arg(long, default_value = "1/2")]
    pub train_fraction: String,
    #[arg(long)]
    pub bidirectional: bool,
    #[arg(long)]
    pub attention: bool,
    #[arg(long, visible_alias = "lr", default_value_t = 1e-3)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 128)]
    pub batch_size: usize,
    /// Pairs with a side longer than this many tokens are dropped.
    #[arg(long, default_value_t = 50)]
    pub max_len: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 128)]
    pub embed_dim: usize,
    #[arg(long, default_value_t = 300)]
    pub hidden_dim: usize,
    #[arg(long, default_value_t = 0.2)]
    pub dropout_rate: f64,
    #[arg(long, default_value_t = 100)]
    pub max_epochs: usize,
    #[arg(long, default_value_t = 5)]
    pub patience: usize,
    #[arg(long, default_value_t = 5.0)]
    pub max_grad_norm: f64,
    #[arg(long, default_value_t = 1e-5)]
    pub weight_decay: f64,
    #[arg(long, default_value_t = 0.9)]
    pub beta1: f64,
    #[arg(long, default_value_t = 0.999)]
    pub beta2: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 50)]
    pub max_decode_len: usize,
    /// Tokens seen fewer times map to `<unk>`.
    #[arg(long, default_value_t = 1)]
    pub min_freq: usize,
    #[arg(long)]
    pub lowercase: bool,
    /// Output directory for checkpoints, vocabularies, log and manifest.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct TranslateArgs {
    /// Checkpoint written by `train`; vocabularies are read from its directory.
    pub checkpoint: PathBuf,
    pub input: PathBuf,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct EvaluateArgs {
    pub hyp: PathBuf,
    pub reference: PathBuf,
    /// Label for the report row.
    #[arg(long, default_value = "model")]
    pub model: String,
    /// Token accuracy in [0, 1] to include in the row.
    #[arg(long)]
    pub accuracy: Option<f64>,
    #[arg(long)]
    pub lowercase: bool,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct RerunArgs {
    pub manifest: PathBuf,
    /// Replaces the recorded output location.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Numeric(_) => EXIT_NUMERIC,
        }
    }

    pub(crate) fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        CliError::Data(format!("cannot access {}: {err}", path.display()))
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::InvalidFraction(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<TextError> for CliError {
    fn from(e: TextError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<AlignError> for CliError {
    fn from(e: AlignError) -> Self {
        match e {
            AlignError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<NnError> for CliError {
    fn from(e: NnError) -> Self {
        match e {
            NnError::NonFiniteDetected(_) => CliError::Numeric(e.to_string()),
            NnError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::NonFinite { .. } => CliError::Numeric(e.to_string()),
            TrainError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            TrainError::Nn(inner) => inner.into(),
            _ => CliError::Data(e.to_string()),
        }
    }
}

/// Executes one parsed command.
pub fn run(command: &Command) -> Result<(), CliError> {
    match command {
        Command::Align(a) => cmd_align(a),
        Command::Stats(a) => cmd_stats(a),
        Command::Split(a) => cmd_split(a),
        Command::Train(a) => cmd_train(a),
        Command::Translate(a) => cmd_translate(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Rerun(a) => cmd_rerun(a),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Errors are reported on stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
