use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use deepagg_core::eval::ApMode;
use deepagg_core::synthetic::Variant;
use deepagg_core::viz::CorrelationMetric;
use deepagg_core::{ChannelMode, SigmaRule, SpatialMode};

#[derive(Debug, Parser)]
#[command(name = "deepagg", version, about = "Weighted aggregation of convolutional features into global image descriptors")]
pub struct Cli {
    /// Emit machine-readable JSON on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Aggregate every tensor in a manifest into a descriptor file.
    Aggregate(AggregateArgs),
    /// Fit a PCA-whitening model on raw descriptors.
    WhitenTrain(WhitenTrainArgs),
    /// Validate descriptors (optionally whitening them) into a search index file.
    Index(IndexArgs),
    /// Rank an index against query descriptors.
    Search(SearchArgs),
    /// Per-query AP and mAP against Oxford-layout ground truth.
    Evaluate(EvaluateArgs),
    /// mAP over a grid of α and output dimensions.
    SweepAlpha(SweepArgs),
    /// mAP for each spatial/channel weighting combination.
    Ablate(AblateArgs),
    /// Heat maps, channel vectors and their correlation.
    #[command(subcommand)]
    Viz(VizCommand),
    /// Write a planted-structure dataset with ground truth.
    GenSynthetic(GenSyntheticArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SpatialArg {
    None,
    Agauss,
    Ngauss,
}

impl From<SpatialArg> for SpatialMode {
    fn from(a: SpatialArg) -> Self {
        match a {
            SpatialArg::None => SpatialMode::None,
            SpatialArg::Agauss => SpatialMode::AGaussian,
            SpatialArg::Ngauss => SpatialMode::NGaussian,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ChannelArg {
    None,
    Echan,
    Schan,
}

impl From<ChannelArg> for ChannelMode {
    fn from(a: ChannelArg) -> Self {
        match a {
            ChannelArg::None => ChannelMode::None,
            ChannelArg::Echan => ChannelMode::EChannel,
            ChannelArg::Schan => ChannelMode::SChannel,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SigmaArg {
    Edge,
    Corner,
}

impl From<SigmaArg> for SigmaRule {
    fn from(a: SigmaArg) -> Self {
        match a {
            SigmaArg::Edge => SigmaRule::Edge,
            SigmaArg::Corner => SigmaRule::Corner,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ApArg {
    Trapezoid,
    Standard,
}

impl From<ApArg> for ApMode {
    fn from(a: ApArg) -> Self {
        match a {
            ApArg::Trapezoid => ApMode::Trapezoid,
            ApArg::Standard => ApMode::Standard,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MetricArg {
    Pearson,
    Cosine,
}

impl From<MetricArg> for CorrelationMetric {
    fn from(a: MetricArg) -> Self {
        match a {
            MetricArg::Pearson => CorrelationMetric::Pearson,
            MetricArg::Cosine => CorrelationMetric::Cosine,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum VariantArg {
    Clean,
    Bursty,
}

impl From<VariantArg> for Variant {
    fn from(a: VariantArg) -> Self {
        match a {
            VariantArg::Clean => Variant::Clean,
            VariantArg::Bursty => Variant::Bursty,
        }
    }
}

/// Weighting options shared by every command that aggregates tensors.
#[derive(Debug, Clone, Args)]
pub struct WeightingArgs {
    /// Fraction of strongest cells used to place the Gaussian center.
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    /// Stabilizing constant of the channel weights.
    #[arg(long, default_value_t = 1e-6)]
    pub eps: f64,
    #[arg(long, value_enum, default_value = "edge")]
    pub sigma_rule: SigmaArg,
}

#[derive(Debug, Args)]
pub struct AggregateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[command(flatten)]
    pub weighting: WeightingArgs,
    #[arg(long, value_enum, default_value = "agauss")]
    pub spatial: SpatialArg,
    #[arg(long, value_enum, default_value = "echan")]
    pub channel: ChannelArg,
    /// Apply this whitening model (output is whitened and re-normalized).
    #[arg(long)]
    pub whitening: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct WhitenTrainArgs {
    #[arg(long)]
    pub descriptors: PathBuf,
    /// Number of retained principal directions.
    #[arg(long)]
    pub dim: usize,
    #[arg(long, default_value_t = deepagg_core::whitening::DEFAULT_EPS_W)]
    pub eps_w: f64,
    /// Plain PCA projection without eigenvalue scaling.
    #[arg(long)]
    pub no_whiten_scale: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    #[arg(long)]
    pub descriptors: PathBuf,
    #[arg(long)]
    pub whitening: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long)]
    pub queries: PathBuf,
    /// Restrict to one query id.
    #[arg(long)]
    pub query: Option<String>,
    #[arg(long, default_value_t = 10)]
    pub top: usize,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long)]
    pub queries: PathBuf,
    /// Ground-truth directory in Oxford layout.
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long, value_enum, default_value = "trapezoid")]
    pub ap_mode: ApArg,
}

/// Dataset locations. `--data` points at a directory holding
/// `database.tsv`, `queries.tsv`, `whitening.tsv` and `gt/`; the
/// individual flags override single entries.
#[derive(Debug, Clone, Args)]
pub struct DatasetArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub database: Option<PathBuf>,
    #[arg(long = "query-manifest")]
    pub queries: Option<PathBuf>,
    #[arg(long = "whitening-manifest")]
    pub whitening: Option<PathBuf>,
    #[arg(long)]
    pub gt: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct HarnessArgs {
    #[command(flatten)]
    pub dataset: DatasetArgs,
    #[arg(long, default_value_t = 1e-6)]
    pub eps: f64,
    #[arg(long, value_enum, default_value = "edge")]
    pub sigma_rule: SigmaArg,
    #[arg(long, value_enum, default_value = "trapezoid")]
    pub ap_mode: ApArg,
    #[arg(long, default_value_t = deepagg_core::whitening::DEFAULT_EPS_W)]
    pub eps_w: f64,
    #[arg(long)]
    pub no_whiten_scale: bool,
    /// Output dimensions, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "512")]
    pub dims: Vec<usize>,
    /// Also write the JSON table here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub harness: HarnessArgs,
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.1,0.5,1.0")]
    pub alphas: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub harness: HarnessArgs,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    /// Run all nine spatial × channel combinations.
    #[arg(long)]
    pub full: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum HeatmapKind {
    /// Channel-summed response map.
    Response,
    /// Adaptive Gaussian weight map.
    Gaussian,
    /// Response times Gaussian.
    Weighted,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum VectorKind {
    /// Element-value items of the spatially weighted channel sums.
    Items,
    /// eChannel weights.
    Weights,
    /// Sparsity items.
    Sparsity,
}

#[derive(Debug, Subcommand)]
pub enum VizCommand {
    /// Render a spatial map of one tensor as a PPM heat map.
    Heatmap(HeatmapArgs),
    /// Pairwise correlation of channel vectors stored as CSV files.
    Corr(CorrArgs),
    /// Export one channel vector per manifest entry as CSV.
    Vectors(VectorsArgs),
}

#[derive(Debug, Args)]
pub struct HeatmapArgs {
    #[arg(long)]
    pub tensor: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value = "gaussian")]
    pub kind: HeatmapKind,
    #[arg(long, value_enum, default_value = "edge")]
    pub sigma_rule: SigmaArg,
    /// Pixels per grid cell.
    #[arg(long, default_value_t = 32)]
    pub scale: usize,
    #[arg(long)]
    pub no_marker: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CorrArgs {
    /// Directory of `<id>.csv` vectors, one value per line.
    #[arg(long)]
    pub vectors: PathBuf,
    #[arg(long, value_enum, default_value = "pearson")]
    pub metric: MetricArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct VectorsArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[command(flatten)]
    pub weighting: WeightingArgs,
    #[arg(long, value_enum, default_value = "agauss")]
    pub spatial: SpatialArg,
    #[arg(long, value_enum, default_value = "items")]
    pub kind: VectorKind,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenSyntheticArgs {
    #[arg(long, value_enum, default_value = "bursty")]
    pub variant: VariantArg,
    #[arg(long, default_value_t = 2018)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}
