use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nsc_core::benchkit::Kernel;
use nsc_core::corpus::SynthFamily;
use nsc_core::hypernet::DEFAULT_VOCAB_SIZE;
use nsc_core::surrogate::PaddingMode;

pub fn cores() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

#[derive(Debug, Parser)]
#[command(name = "nsc", version, about = "Neural surrogate compilation workbench")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Mine a directory of C sources into a JSONL dataset.
    CorpusBuild(CorpusBuildArgs),
    /// Generate programs from a parametric family and run them through the pipeline.
    CorpusSynth(CorpusSynthArgs),
    /// Train a hypernetwork on a dataset.
    HypernetTrain(HypernetTrainArgs),
    /// Train a program-agnostic baseline initialization.
    BaselineTrain {
        #[command(subcommand)]
        kind: BaselineKind,
    },
    /// Compile a C source file into surrogate parameters.
    Compile(CompileArgs),
    /// Finetune a surrogate on one program of a dataset.
    Finetune(FinetuneArgs),
    /// Data-efficiency experiment over a dataset.
    EvalDataEfficiency(EvalArgs),
    /// Training-time-to-target experiment over a dataset.
    EvalTrainingTime(EvalArgs),
    /// Color-quantize a PPM image with k-means.
    Quantize(QuantizeArgs),
    /// Single- versus double-precision error of the benchmark kernels.
    DowncastStudy(DowncastArgs),
    /// Rebuild the improvement table and summary from stored trials.
    Report(ReportArgs),
}

#[derive(Debug, Subcommand)]
pub enum BaselineKind {
    /// First-order MAML over the dataset's programs.
    Maml(MamlArgs),
    /// One surrogate trained on the pooled rows of every program.
    Pretrain(PretrainArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ConfigArg {
    /// Flat key=value file whose keys are flag names.
    #[arg(long, alias = "plan")]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Padding {
    Random,
    Zero,
}

impl From<Padding> for PaddingMode {
    fn from(p: Padding) -> Self {
        match p {
            Padding::Random => PaddingMode::RandomPad,
            Padding::Zero => PaddingMode::ZeroPad,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DistanceMode {
    Exact,
    Surrogate,
}

fn parse_family(s: &str) -> Result<SynthFamily, String> {
    s.parse().map_err(|e: nsc_core::corpus::CorpusError| e.to_string())
}

fn parse_fraction(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is outside [0, 1]"))
    }
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct CorpusBuildArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// Directory searched recursively for .c files.
    #[arg(long)]
    pub root: PathBuf,
    /// Output dataset (JSONL).
    #[arg(long)]
    pub out: PathBuf,
    /// Rejection audit log (JSONL).
    #[arg(long)]
    pub audit: Option<PathBuf>,
    #[arg(long, default_value_t = 512)]
    pub max_tokens: usize,
    #[arg(long, default_value_t = 9)]
    pub max_arity: usize,
    /// Largest accepted absolute output value.
    #[arg(long, default_value_t = 10.0)]
    pub out_limit: f64,
    /// Per-program execution timeout.
    #[arg(long, default_value_t = 8.0)]
    pub timeout_secs: f64,
    /// Rows in the shared input bank.
    #[arg(long, default_value_t = 2048)]
    pub io_rows: usize,
    #[arg(long, default_value_t = 0.5, value_parser = parse_fraction)]
    pub train_fraction: f64,
    #[arg(long, default_value_t = 5)]
    pub determinism_runs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = cores())]
    pub jobs: usize,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct CorpusSynthArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// affine, quadratic or trig-mix.
    #[arg(long, default_value = "affine", value_parser = parse_family)]
    pub family: SynthFamily,
    #[arg(long, default_value_t = 50)]
    pub count: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 2048)]
    pub io_rows: usize,
    #[arg(long, default_value_t = 8.0)]
    pub timeout_secs: f64,
    #[arg(long, default_value_t = 0.5, value_parser = parse_fraction)]
    pub train_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = cores())]
    pub jobs: usize,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct HypernetTrainArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// Training dataset (JSONL).
    #[arg(long)]
    pub data: PathBuf,
    /// Output model checkpoint.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1500)]
    pub epochs: usize,
    #[arg(long, default_value_t = 5e-5)]
    pub lr: f64,
    #[arg(long, default_value_t = 32)]
    pub program_batch: usize,
    #[arg(long, default_value_t = 1024)]
    pub input_batch: usize,
    #[arg(long, value_enum, default_value_t = Padding::Random)]
    pub padding: Padding,
    #[arg(long, default_value_t = 2)]
    pub layers: usize,
    #[arg(long, default_value_t = 128)]
    pub hidden: usize,
    #[arg(long, default_value_t = 2)]
    pub heads: usize,
    #[arg(long, default_value_t = 512)]
    pub feed_forward: usize,
    #[arg(long, default_value_t = DEFAULT_VOCAB_SIZE)]
    pub vocab_size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct MamlArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    #[arg(long)]
    pub data: PathBuf,
    /// Output parameter vector.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 32)]
    pub meta_batch: usize,
    #[arg(long, default_value_t = 1024)]
    pub input_batch: usize,
    /// Meta-iterations.
    #[arg(long, default_value_t = 5000)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.2)]
    pub inner_lr: f64,
    #[arg(long, default_value_t = 0.001)]
    pub outer_lr: f64,
    #[arg(long, default_value_t = 3)]
    pub inner_steps: usize,
    #[arg(long, value_enum, default_value_t = Padding::Zero)]
    pub padding: Padding,
    /// Share of each program's train rows used as support.
    #[arg(long, default_value_t = 5.0 / 7.0, value_parser = parse_fraction)]
    pub support_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct PretrainArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 32)]
    pub program_batch: usize,
    #[arg(long, default_value_t = 1024)]
    pub input_batch: usize,
    #[arg(long, default_value_t = 1e-5)]
    pub lr: f64,
    #[arg(long, default_value_t = 1500)]
    pub epochs: usize,
    #[arg(long, value_enum, default_value_t = Padding::Random)]
    pub padding: Padding,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct CompileArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// Hypernetwork checkpoint.
    #[arg(long)]
    pub model: PathBuf,
    /// C source of one function.
    #[arg(long)]
    pub source: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct FinetuneArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    #[arg(long)]
    pub data: PathBuf,
    /// Program id, or its zero-based index in the dataset.
    #[arg(long)]
    pub program: String,
    /// Initial parameter vector; He-random from the seed when absent.
    #[arg(long)]
    pub init: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Per-logged-epoch losses (CSV).
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long, default_value_t = 5000)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    /// Fraction of the program's train rows to train on.
    #[arg(long, default_value_t = 1.0, value_parser = parse_fraction)]
    pub size: f64,
    #[arg(long, default_value_t = 0.2, value_parser = parse_fraction)]
    pub val_fraction: f64,
    #[arg(long, value_enum, default_value_t = Padding::Zero)]
    pub padding: Padding,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct EvalArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    #[arg(long)]
    pub data: PathBuf,
    /// Directory for trials, table, summary and manifest.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Use only the first N programs (0 = all).
    #[arg(long, default_value_t = 0)]
    pub programs: usize,
    /// Dataset-size fractions (data-efficiency only).
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.001, 0.01, 0.1, 1.0])]
    pub sizes: Vec<f64>,
    #[arg(long, default_value_t = 9)]
    pub trials: usize,
    /// Finetuning epochs per trial; the training-time target epochs.
    #[arg(long, default_value_t = 5000)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.2, value_parser = parse_fraction)]
    pub val_fraction: f64,
    #[arg(long, value_enum, default_value_t = Padding::Zero)]
    pub padding: Padding,
    /// Hypernetwork checkpoints, one instance each (method CPN).
    #[arg(long, value_delimiter = ',')]
    pub cpn: Vec<PathBuf>,
    /// MAML parameter vectors, one instance each.
    #[arg(long, value_delimiter = ',')]
    pub maml: Vec<PathBuf>,
    /// Pretrained parameter vectors, one instance each (method PTS).
    #[arg(long, value_delimiter = ',')]
    pub pts: Vec<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = cores())]
    pub jobs: usize,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct QuantizeArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// Binary PPM (P6) input.
    #[arg(long)]
    pub input: PathBuf,
    /// Quantized PPM output.
    #[arg(long)]
    pub out: PathBuf,
    /// JSON report with the palette, MSE and SSIM.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, default_value_t = 40)]
    pub max_iters: usize,
    /// Stop when no centroid moves further than this.
    #[arg(long, default_value_t = 1e-5)]
    pub tolerance: f64,
    #[arg(long, value_enum, default_value_t = DistanceMode::Exact)]
    pub distance: DistanceMode,
    /// Surrogate parameter vector for the distance kernel.
    #[arg(long)]
    pub surrogate: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct DowncastArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// Comma-separated kernel names, or all.
    #[arg(long, value_delimiter = ',', default_value = "all")]
    pub kernels: Vec<String>,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl DowncastArgs {
    pub fn kernel_list(&self) -> Result<Vec<Kernel>, String> {
        if self.kernels.iter().any(|k| k == "all") {
            return Ok(Kernel::ALL.to_vec());
        }
        self.kernels.iter().map(|k| k.parse::<Kernel>().map_err(|e| e.to_string())).collect()
    }
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct ReportArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// trials.json written by an eval command.
    #[arg(long)]
    pub trials: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value = "RND")]
    pub baseline: String,
}
