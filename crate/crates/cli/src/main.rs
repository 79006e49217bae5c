//! `urgency`: preprocessing, embedding and classifier training, prediction,
//! evaluation, synthetic data and the labeling service.
//!
//! Every command takes `--seed` and `--config`; all randomness derives from
//! the one seed, so equal inputs, config and seed give equal outputs.

mod commands;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use urgency::model::FeatureSet;
use urgency::synth::Topic;

#[derive(Debug, Parser)]
#[command(name = "urgency", version, about = "Urgency detection for short crisis messages")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Base seed; overrides `seed` in the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// TOML pipeline config; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Log at debug level.
    #[arg(long, short, global = true)]
    pub verbose: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tokenize messages and write `{id, tokens, label?}` JSON lines.
    Preprocess(PreprocessArgs),
    /// Train local subword skip-gram embeddings on background text.
    TrainEmbeddings(TrainEmbeddingsArgs),
    /// Train an ensemble on one labeled crisis dataset.
    Train(TrainArgs),
    /// Train an ensemble for a new crisis from a few target labels plus a
    /// labeled source crisis.
    TransferTrain(TransferTrainArgs),
    /// Score messages with a saved ensemble.
    Predict(PredictArgs),
    /// Compare single feature sets, pairs and the full ensemble over
    /// repeated stratified splits.
    EvaluateRq1(EvaluateRq1Args),
    /// Compare transfer strategies on a target crisis.
    EvaluateRq2(EvaluateRq2Args),
    /// Active-labeling commands.
    Active {
        #[command(subcommand)]
        command: ActiveCommand,
    },
    /// Write a synthetic crisis corpus and stand-in pre-trained vectors.
    SynthCorpus(SynthArgs),
    /// Print the resolved configuration as TOML.
    Config,
}

#[derive(Debug, Subcommand)]
pub enum ActiveCommand {
    /// Serve scoring and labeling sessions over HTTP.
    Serve(ServeArgs),
}

/// Input files: `.jsonl`/`.json` are JSON lines, anything else one message
/// per line.
#[derive(Debug, Args)]
pub struct PreprocessArgs {
    #[arg(long, short)]
    pub input: PathBuf,
    /// Defaults to stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainEmbeddingsArgs {
    /// Background text files; repeatable.
    #[arg(long = "corpus", required = true)]
    pub corpora: Vec<PathBuf>,
    #[arg(long, short)]
    pub output: PathBuf,
    /// Also write word vectors as text to this path.
    #[arg(long)]
    pub text_output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FeatureArg {
    Manual,
    Local,
    Wiki,
}

impl From<FeatureArg> for FeatureSet {
    fn from(f: FeatureArg) -> Self {
        match f {
            FeatureArg::Manual => FeatureSet::Manual,
            FeatureArg::Local => FeatureSet::LocalEmbedding,
            FeatureArg::Wiki => FeatureSet::WikiEmbedding,
        }
    }
}

#[derive(Debug, Args)]
pub struct EmbeddingArgs {
    /// Background text for the local embedding; repeatable.
    #[arg(long = "corpus")]
    pub corpora: Vec<PathBuf>,
    /// Use this local embedding instead of training one.
    #[arg(long)]
    pub local: Option<PathBuf>,
    /// Pre-trained general-domain vectors (text or binary).
    #[arg(long)]
    pub wiki: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub labeled: PathBuf,
    #[command(flatten)]
    pub embeddings: EmbeddingArgs,
    /// Members to train; defaults to every set whose inputs are present.
    #[arg(long = "features", value_delimiter = ',')]
    pub features: Vec<FeatureArg>,
    /// Receives `model.json`, `local.uemb` and `validation.json`.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct TransferTrainArgs {
    /// Few labeled messages from the new crisis.
    #[arg(long)]
    pub target: PathBuf,
    #[arg(long)]
    pub source_labeled: PathBuf,
    /// Unlabeled source text for the local embedding; repeatable.
    #[arg(long = "source-corpus")]
    pub source_corpora: Vec<PathBuf>,
    #[arg(long)]
    pub local: Option<PathBuf>,
    #[arg(long)]
    pub wiki: Option<PathBuf>,
    /// Receives `model.json` and `local.uemb`.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long, short)]
    pub model: PathBuf,
    /// Messages to score.
    #[arg(long, short, conflicts_with = "text")]
    pub input: Option<PathBuf>,
    /// Literal texts to score; repeatable.
    #[arg(long)]
    pub text: Vec<String>,
    /// Defaults to stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateRq1Args {
    #[arg(long)]
    pub labeled: PathBuf,
    /// Background text; repeatable. The labeled text is always included.
    #[arg(long = "corpus")]
    pub corpora: Vec<PathBuf>,
    #[arg(long)]
    pub wiki: PathBuf,
    /// Report as JSON.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateRq2Args {
    #[arg(long)]
    pub source_labeled: PathBuf,
    #[arg(long = "source-corpus")]
    pub source_corpora: Vec<PathBuf>,
    #[arg(long)]
    pub target_labeled: PathBuf,
    #[arg(long)]
    pub wiki: PathBuf,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    /// Ensemble for `/v1/score`; its featurizer is also used by sessions.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Default pool for sessions created without messages.
    #[arg(long)]
    pub pool: Option<PathBuf>,
    /// Persist sessions here and resume them on start.
    #[arg(long)]
    pub sessions_dir: Option<PathBuf>,
    /// Embeddings for session retrains when no model is given.
    #[arg(long)]
    pub local: Option<PathBuf>,
    #[arg(long)]
    pub wiki: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TopicArg {
    Flood,
    Earthquake,
}

impl From<TopicArg> for Topic {
    fn from(t: TopicArg) -> Self {
        match t {
            TopicArg::Flood => Topic::Flood,
            TopicArg::Earthquake => Topic::Earthquake,
        }
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Receives `unlabeled.jsonl`, `labeled.jsonl` and `wiki.vec`.
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 5000)]
    pub unlabeled: usize,
    #[arg(long, default_value_t = 400)]
    pub labeled: usize,
    #[arg(long, value_enum, default_value = "flood")]
    pub topic: TopicArg,
    #[arg(long, default_value_t = 0.6)]
    pub keyword_prob: f64,
    #[arg(long, default_value_t = 0.4)]
    pub digit_prob: f64,
    #[arg(long, default_value = "")]
    pub id_prefix: String,
    /// Dimension of the stand-in pre-trained vectors.
    #[arg(long, default_value_t = 50)]
    pub wiki_dim: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.global.verbose {
        tracing::Level::DEBUG
    } else {
        tracing::Level::INFO
    };
    tracing_subscriber::fmt()
        .with_max_level(level)
        .with_writer(std::io::stderr)
        .init();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
