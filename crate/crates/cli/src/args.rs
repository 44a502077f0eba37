use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use strapkit::evalstats::{Aggregation, TestMethod};
use strapkit::stain::HedChannel;

#[derive(Debug, Parser)]
#[command(name = "strapkit", version, about = "Batch preprocessing and evaluation for histopathology tiles")]
pub struct Cli {
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, env = "STRAPKIT_THREADS", default_value_t = 0)]
    pub workers: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render every tile of a manifest in the style of a randomly chosen style tile.
    Stylize(StylizeArgs),
    /// Stain normalization and stain augmentation baselines.
    #[command(subcommand)]
    Stain(StainCommand),
    /// Write one low-pass filtered copy of a dataset per radius.
    Lowpass(LowpassArgs),
    /// AUROC with bootstrap intervals and paired comparisons.
    Eval(EvalArgs),
    /// Per-tile timings of stylization, stain augmentation and normalization.
    Bench(BenchArgs),
    /// Weight file utilities.
    #[command(subcommand)]
    Weights(WeightsCommand),
}

#[derive(Debug, Subcommand)]
pub enum StainCommand {
    Normalize(NormalizeArgs),
    Augment(AugmentArgs),
    /// Estimate a reference stain profile from one tile.
    EstimateReference(EstimateReferenceArgs),
}

#[derive(Debug, Subcommand)]
pub enum WeightsCommand {
    /// Write randomly initialized (or identity) weights for a built-in architecture.
    Init(WeightsInitArgs),
}

#[derive(Debug, Clone, Args)]
pub struct StylizeArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Manifest of style source tiles.
    #[arg(long)]
    pub styles: PathBuf,
    #[arg(long)]
    pub weights: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1024)]
    pub content_size: usize,
    #[arg(long, default_value_t = 256)]
    pub style_size: usize,
    #[arg(long, default_value_t = 1e-5)]
    pub eps: f64,
    /// Normalize encoder input with ImageNet mean and std (for converted pretrained weights).
    #[arg(long)]
    pub imagenet: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct MacenkoArgs {
    #[arg(long, default_value_t = 0.15)]
    pub od_threshold: f64,
    #[arg(long, default_value_t = 1.0)]
    pub angle_percentile: f64,
    #[arg(long, default_value_t = 99.0)]
    pub conc_percentile: f64,
    #[arg(long, default_value_t = 1.0)]
    pub io: f64,
    #[arg(long, default_value_t = 0.05)]
    pub min_tissue_fraction: f64,
}

#[derive(Debug, Clone, Args)]
pub struct NormalizeArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Reference stain profile JSON; the bundled reference when omitted.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[command(flatten)]
    pub macenko: MacenkoArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ChannelArg {
    H,
    E,
    D,
}

impl From<ChannelArg> for HedChannel {
    fn from(c: ChannelArg) -> Self {
        match c {
            ChannelArg::H => HedChannel::H,
            ChannelArg::E => HedChannel::E,
            ChannelArg::D => HedChannel::D,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct AugmentArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub copies: usize,
    #[arg(long, default_value_t = 0.05)]
    pub sigma_scale: f64,
    #[arg(long, default_value_t = 0.05)]
    pub sigma_shift: f64,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [ChannelArg::H, ChannelArg::E, ChannelArg::D])]
    pub channels: Vec<ChannelArg>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct EstimateReferenceArgs {
    #[arg(long)]
    pub tile: PathBuf,
    #[command(flatten)]
    pub macenko: MacenkoArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct LowpassArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Comma-separated radii or a `start:stop:step` range.
    #[arg(long, default_value = "14:154:14")]
    pub radii: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AggregateArg {
    Tile,
    Patient,
}

impl From<AggregateArg> for Aggregation {
    fn from(a: AggregateArg) -> Self {
        match a {
            AggregateArg::Tile => Aggregation::Tile,
            AggregateArg::Patient => Aggregation::Patient,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TestArg {
    Delong,
    Permutation,
    PairedT,
}

impl From<TestArg> for TestMethod {
    fn from(t: TestArg) -> Self {
        match t {
            TestArg::Delong => TestMethod::Delong,
            TestArg::Permutation => TestMethod::Permutation,
            TestArg::PairedT => TestMethod::PairedT,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Primary score table (`tile_id,patient_id,score,label[,fold]`).
    #[arg(long)]
    pub scores: Option<PathBuf>,
    /// Score tables compared against the primary one.
    #[arg(long = "compare")]
    pub compare: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = AggregateArg::Tile)]
    pub aggregate: AggregateArg,
    #[arg(long, default_value_t = 2000)]
    pub bootstrap: usize,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long, value_enum)]
    pub test: Option<TestArg>,
    #[arg(long, default_value_t = 2000)]
    pub permutation: usize,
    /// Score threshold for the predictions used by the permutation test.
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[arg(long, default_value_t = 0.10)]
    pub bh_q: f64,
    /// Additional p-values adjusted together with the comparison p-values.
    #[arg(long, value_delimiter = ',')]
    pub p_values: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// Side length of the synthetic tile used for stain operations.
    #[arg(long, default_value_t = 512)]
    pub size: usize,
    /// Side length used for stylization.
    #[arg(long, default_value_t = 256)]
    pub stylize_size: usize,
    /// Weights for the stylization timing; small random weights when omitted.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ArchArg {
    /// Full-width VGG encoder and mirrored decoder.
    Vgg,
    /// Same topology with channel widths divided by 16.
    Tiny,
    /// Single 1x1 identity convolution per role.
    Identity,
}

#[derive(Debug, Clone, Args)]
pub struct WeightsInitArgs {
    #[arg(long, value_enum, default_value_t = ArchArg::Tiny)]
    pub arch: ArchArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// File name (without extension) inside the output directory.
    #[arg(long, default_value = "weights")]
    pub name: String,
    #[arg(long)]
    pub out: PathBuf,
}
