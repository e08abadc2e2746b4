use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use osv_core::nn::SgdConfig;
use osv_core::{ResNetConfig, SourceTaskKind, StrategyKind};

#[derive(Parser, Debug)]
#[command(name = "osv", version, about = "Offline signature verification experiments")]
pub struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "OSV_THREADS")]
    pub threads: Option<usize>,

    /// Only log warnings and errors.
    #[arg(short, long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic handwriting or signature corpus.
    #[command(args_override_self = true)]
    Synth(SynthArgs),
    /// Train a feature network on a handwriting source task.
    #[command(args_override_self = true)]
    Pretrain(PretrainArgs),
    /// Prepare an extractor and write features for every signature.
    #[command(args_override_self = true)]
    Extract(ExtractArgs),
    /// Train one verifier per user from a feature file.
    #[command(name = "train-verifiers", args_override_self = true)]
    TrainVerifiers(TrainVerifiersArgs),
    /// Run the verification protocol and write CSV and table reports.
    #[command(args_override_self = true)]
    Evaluate(EvaluateArgs),
    /// Render the tables of an existing CSV report.
    #[command(args_override_self = true)]
    Report(ReportArgs),
    /// Synthesize corpora, pretrain, evaluate and report in one go.
    #[command(args_override_self = true)]
    Pipeline(PipelineArgs),
}

/// Reads `key=value` lines from FILE as defaults for this command's flags;
/// flags given on the command line win.
#[derive(Args, Debug, Clone, Default)]
pub struct ConfigArg {
    /// key=value file of option defaults; explicit flags take precedence.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum CorpusKind {
    Handwriting,
    Signatures,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Arch {
    /// 242×242 inputs, 384-dimensional features.
    Standard,
    /// 62×62 inputs, 24-dimensional features; for quick trials.
    Micro,
}

impl Arch {
    pub fn config(self, num_classes: usize) -> ResNetConfig {
        match self {
            Arch::Standard => ResNetConfig::standard(num_classes),
            Arch::Micro => ResNetConfig::micro(num_classes),
        }
    }
}

/// Comma-separated list flag.
#[derive(Clone, Debug, PartialEq)]
pub struct List<T>(pub Vec<T>);

fn list<T>(s: &str, item: impl Fn(&str) -> Result<T, String>) -> Result<List<T>, String> {
    let items: Vec<T> = s
        .split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(item)
        .collect::<Result<_, _>>()?;
    if items.is_empty() {
        return Err("empty list".into());
    }
    Ok(List(items))
}

fn number<T: std::str::FromStr>(s: &str) -> Result<T, String> {
    s.parse().map_err(|_| format!("'{s}' is not a valid number"))
}

pub fn counts(s: &str) -> Result<List<usize>, String> {
    list(s, number)
}

pub fn seeds(s: &str) -> Result<List<u64>, String> {
    list(s, number)
}

pub fn names(s: &str) -> Result<List<String>, String> {
    list(s, |x| Ok(x.to_string()))
}

pub fn paths(s: &str) -> Result<List<PathBuf>, String> {
    list(s, |x| Ok(PathBuf::from(x)))
}

pub fn task(s: &str) -> Result<SourceTaskKind, String> {
    SourceTaskKind::parse(s).map_err(|e| e.to_string())
}

pub fn tasks(s: &str) -> Result<List<SourceTaskKind>, String> {
    list(s, task)
}

pub fn strategy(s: &str) -> Result<StrategyKind, String> {
    StrategyKind::parse(s).map_err(|e| e.to_string())
}

pub fn strategies(s: &str) -> Result<List<StrategyKind>, String> {
    list(s, strategy)
}

/// Optimiser settings for network training.
#[derive(Args, Debug, Clone)]
pub struct TrainArgs {
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    /// Initial learning rate; halved after each third of the epochs.
    #[arg(long, default_value_t = 0.01)]
    pub lr: f32,
    #[arg(long, default_value_t = 0.9)]
    pub momentum: f32,
    #[arg(long, default_value_t = 1e-4)]
    pub weight_decay: f32,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
}

impl TrainArgs {
    pub fn sgd(&self, seed: u64) -> SgdConfig {
        SgdConfig {
            learning_rate: self.lr,
            momentum: self.momentum,
            weight_decay: self.weight_decay,
            batch_size: self.batch_size,
            epochs: self.epochs,
            seed,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct FinetuneArgs {
    #[arg(long, default_value_t = 5)]
    pub finetune_epochs: usize,
    /// Fine-tuning learning rate; 0 keeps the pretrained backbone.
    #[arg(long, default_value_t = 0.001)]
    pub finetune_lr: f32,
}

#[derive(Args, Debug, Clone)]
pub struct ProtocolArgs {
    /// Genuine signatures per user for verifier training.
    #[arg(long, value_parser = counts, default_value = "5,7,10")]
    pub train_counts: List<usize>,
    /// One run per seed; results are averaged over runs.
    #[arg(long, value_parser = seeds, default_value = "1,2,3,4,5")]
    pub seed_list: List<u64>,
    /// Kernels as kind[:key=value]..., e.g. log:d=2, rbf:gamma=0.01,
    /// poly:gamma=0.5:degree=3:coef0=1; unset gamma is 1/feature-dim.
    #[arg(long, value_parser = names, default_value = "log")]
    pub kernels: List<String>,
    /// SVM box constraint before class balancing.
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    /// Random forgeries (other users' genuines) per verifier.
    #[arg(long, default_value_t = 200)]
    pub forgeries: usize,
    /// Images per forward pass during feature extraction.
    #[arg(long, default_value_t = 16)]
    pub extract_batch: usize,
}

#[derive(Args, Debug, Clone)]
pub struct SynthArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = CorpusKind::Handwriting)]
    pub kind: CorpusKind,
    #[arg(long, default_value_t = 10)]
    pub writers: usize,
    /// Word classes per writer (handwriting).
    #[arg(long, default_value_t = 5)]
    pub words: usize,
    /// Samples per writer and word (handwriting).
    #[arg(long, default_value_t = 20)]
    pub samples: usize,
    /// Genuine signatures per writer (signatures).
    #[arg(long, default_value_t = 15)]
    pub genuine: usize,
    /// Skilled forgeries per writer (signatures).
    #[arg(long, default_value_t = 10)]
    pub skilled: usize,
    /// Perturbation scale of skilled forgeries.
    #[arg(long, default_value_t = 0.3)]
    pub forgery_scale: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Args, Debug, Clone)]
pub struct PretrainArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// Handwriting corpus directory (or its manifest).
    #[arg(long, value_name = "DIR")]
    pub data: PathBuf,
    /// Output checkpoint; metadata and training log are written beside it.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Source task: word-rec or writer-id.
    #[arg(long, value_parser = task, default_value = "word-rec")]
    pub task: SourceTaskKind,
    #[arg(long, value_enum, default_value_t = Arch::Standard)]
    pub arch: Arch,
    #[command(flatten)]
    pub train: TrainArgs,
    /// Fraction of samples held out to test the trained network.
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Args, Debug, Clone)]
pub struct ExtractArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// Signature corpus directory (or its manifest).
    #[arg(long, value_name = "DIR")]
    pub data: PathBuf,
    /// Output feature file; an index is written beside it.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// scratch, fixed or finetune.
    #[arg(long, value_parser = strategy, default_value = "fixed")]
    pub strategy: StrategyKind,
    /// Pretrained checkpoint for the fixed and finetune strategies.
    #[arg(long, value_name = "FILE")]
    pub checkpoint: Option<PathBuf>,
    /// Training genuines per user for signature-domain training.
    #[arg(long, default_value_t = 10)]
    pub train_count: usize,
    /// Seed of the genuine split and of signature-domain training.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Architecture for the scratch strategy.
    #[arg(long, value_enum, default_value_t = Arch::Standard)]
    pub arch: Arch,
    #[command(flatten)]
    pub train: TrainArgs,
    #[command(flatten)]
    pub finetune: FinetuneArgs,
    #[arg(long, default_value_t = 16)]
    pub extract_batch: usize,
}

#[derive(Args, Debug, Clone)]
pub struct TrainVerifiersArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// Feature file written by `extract`.
    #[arg(long, value_name = "FILE")]
    pub features: PathBuf,
    /// Directory for the per-user verifier files.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub train_count: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value = "log")]
    pub kernel: String,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    #[arg(long, default_value_t = 200)]
    pub forgeries: usize,
}

#[derive(Args, Debug, Clone)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// Signature corpus directory (or its manifest).
    #[arg(long, value_name = "DIR")]
    pub data: PathBuf,
    /// Directory for report.csv and report.txt.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Strategies among scratch, fixed and finetune.
    #[arg(long, value_parser = strategies, default_value = "scratch")]
    pub strategies: List<StrategyKind>,
    /// Pretrained checkpoints; fixed and finetune run once per checkpoint.
    #[arg(long, value_parser = paths)]
    pub checkpoints: Option<List<PathBuf>>,
    /// Architecture for the scratch strategy.
    #[arg(long, value_enum, default_value_t = Arch::Standard)]
    pub arch: Arch,
    #[command(flatten)]
    pub train: TrainArgs,
    #[command(flatten)]
    pub finetune: FinetuneArgs,
    #[command(flatten)]
    pub protocol: ProtocolArgs,
}

#[derive(Args, Debug, Clone)]
pub struct ReportArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// CSV report written by `evaluate`.
    #[arg(long, value_name = "FILE")]
    pub csv: PathBuf,
    /// Write the tables here instead of standard output.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct PipelineArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// Run directory: corpora, checkpoints and reports go below it.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Master seed of both corpora and of pretraining.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Signature writers.
    #[arg(long, default_value_t = 20)]
    pub writers: usize,
    #[arg(long, default_value_t = 15)]
    pub genuine: usize,
    #[arg(long, default_value_t = 10)]
    pub skilled: usize,
    #[arg(long, default_value_t = 0.3)]
    pub forgery_scale: f64,
    /// Handwriting writers.
    #[arg(long, default_value_t = 30)]
    pub hw_writers: usize,
    #[arg(long, default_value_t = 10)]
    pub hw_words: usize,
    #[arg(long, default_value_t = 2)]
    pub hw_samples: usize,
    /// Source tasks to pretrain, one checkpoint each.
    #[arg(long, value_parser = tasks, default_value = "word-rec,writer-id")]
    pub tasks: List<SourceTaskKind>,
    #[arg(long, default_value_t = 10)]
    pub pretrain_epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    pub pretrain_lr: f32,
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
    #[arg(long, value_parser = strategies, default_value = "fixed,finetune,scratch")]
    pub strategies: List<StrategyKind>,
    #[arg(long, value_enum, default_value_t = Arch::Standard)]
    pub arch: Arch,
    /// Scratch training; momentum, decay and batch size also apply to
    /// pretraining and fine-tuning.
    #[command(flatten)]
    pub train: TrainArgs,
    #[command(flatten)]
    pub finetune: FinetuneArgs,
    #[command(flatten)]
    pub protocol: ProtocolArgs,
}
