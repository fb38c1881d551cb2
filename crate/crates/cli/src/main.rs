use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use spoilershed::classifier::Packing;
use spoilershed::corpus::Schema;
use spoilershed::model::{GenreMode, HeadVariant};
use spoilershed::training::{LossKind, StopMetric};

mod commands;
mod config;

pub const THREADS_ENV: &str = "SPOILERSHED_THREADS";

#[derive(Debug, Parser)]
#[command(name = "spoilershed", version, about = "Spoiler corpus extraction, training and analysis")]
pub struct Cli {
    /// Seed for every random choice of the run.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Flat key=value file; flags take precedence over it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker thread cap (default: $SPOILERSHED_THREADS, else all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a span-annotated dataset from a directory of stored pages.
    Extract(ExtractArgs),
    /// Corpus utilities.
    Dataset {
        #[command(subcommand)]
        action: DatasetAction,
    },
    /// Train a classifier on `train.jsonl` / `val.jsonl` of a dataset directory.
    Train(TrainArgs),
    /// Sentence-level metrics of a trained model on a dataset file.
    Eval(EvalArgs),
    /// Faithfulness and attention analyses of a trained model.
    Analyze {
        #[command(subcommand)]
        action: AnalyzeAction,
    },
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    pub snapshot_dir: PathBuf,
    /// Class (or tag) name of the spoiler delimiter.
    #[arg(long)]
    pub spoiler_class: Option<String>,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Dataset JSONL file.
    pub input: PathBuf,
    #[arg(long)]
    pub schema: Option<Schema>,
}

#[derive(Debug, Subcommand)]
pub enum DatasetAction {
    /// Keep every spoiler document and as many sampled clean ones.
    Balance(InputArgs),
    /// Stratified document-level train/val/test split.
    Split(SplitArgs),
    /// Corpus statistics as JSON and text.
    Stats(StatsArgs),
    /// Generate a planted-marker synthetic corpus.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub train_ratio: Option<f64>,
    #[arg(long)]
    pub val_ratio: Option<f64>,
    #[arg(long)]
    pub test_ratio: Option<f64>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub bins: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub docs: Option<usize>,
    #[arg(long)]
    pub spoiler_rate: Option<f64>,
    #[arg(long)]
    pub decoy_rate: Option<f64>,
    #[arg(long)]
    pub min_sentences: Option<usize>,
    #[arg(long)]
    pub max_sentences: Option<usize>,
    #[arg(long)]
    pub min_words: Option<usize>,
    #[arg(long)]
    pub max_words: Option<usize>,
    /// Relative spread of per-genre spoiler rates; 0 disables genres.
    #[arg(long)]
    pub genre_spread: Option<f64>,
    /// Plant spoilers as runs of 2 to 3 consecutive sentences.
    #[arg(long)]
    pub context_runs: Option<bool>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Directory holding train.jsonl and val.jsonl.
    pub data: PathBuf,
    #[arg(long)]
    pub schema: Option<Schema>,
    #[arg(long)]
    pub head: Option<HeadVariant>,
    #[arg(long)]
    pub genre: Option<GenreMode>,
    /// Sentences per input; above 1 packs documents with an even split.
    #[arg(long)]
    pub context: Option<usize>,
    #[arg(long)]
    pub packing: Option<Packing>,
    #[arg(long)]
    pub loss: Option<LossKind>,
    #[arg(long)]
    pub focal_gamma: Option<f64>,
    /// Positive-class weight, or `auto` for negatives/positives.
    #[arg(long)]
    pub pos_weight: Option<String>,
    #[arg(long)]
    pub init_bias: Option<bool>,
    #[arg(long)]
    pub max_pieces: Option<usize>,
    #[arg(long)]
    pub lowercase: Option<bool>,
    #[arg(long)]
    pub min_frequency: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub warmup: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub stop_metric: Option<StopMetric>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub heads: Option<usize>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub ff_width: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Directory written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub input: InputArgs,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub input: InputArgs,
    /// Fraction of eligible sentences analysed.
    #[arg(long)]
    pub sample: Option<f64>,
    /// Only sentences with exactly one spoiler span.
    #[arg(long)]
    pub single_span: Option<bool>,
}

#[derive(Debug, Subcommand)]
pub enum AnalyzeAction {
    Comprehensiveness(AnalyzeArgs),
    Sufficiency(AnalyzeArgs),
    Attention(AnalyzeArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => match e.downcast_ref::<commands::UsageError>() {
            Some(usage) => {
                eprintln!("error: {usage}");
                ExitCode::from(2)
            }
            None => {
                eprintln!("error: {e:#}");
                ExitCode::FAILURE
            }
        },
    }
}
