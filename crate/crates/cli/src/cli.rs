//! Command-line surface of the `medsr` binary.

use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use medsr_core::io::{PhantomKind, VolumeFormat};
use medsr_core::metrics::{EvalMode, ResizeMethod};
use medsr_core::Axes;

#[derive(Debug, Parser)]
#[command(name = "medsr", version, about = "Two-stage CNN super-resolution for CT/MRI volumes")]
pub struct Cli {
    /// More log output (-v debug, -vv trace). RUST_LOG overrides.
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write seeded synthetic volumes and a train/test manifest.
    Phantom(PhantomArgs),
    /// Crop, degrade and store LR/HR volume pairs for a manifest.
    Prepare(PrepareArgs),
    /// Train the in-plane (xy) or depth (z) network.
    Train(TrainArgs),
    /// Super-resolve one volume with trained checkpoints.
    Infer(InferArgs),
    /// Score reconstructions of the held-out volumes.
    Evaluate(EvaluateArgs),
    /// Render blinded comparison pairs for the preference study.
    StudyPrepare(StudyPrepareArgs),
    /// Serve the preference-study HTTP API.
    StudyServe(StudyServeArgs),
    /// Aggregate recorded study votes into a per-annotator table.
    StudyReport(StudyReportArgs),
}

#[derive(Debug, Args)]
pub struct PhantomArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 8)]
    pub count: usize,
    /// Extents as W or W,H,D.
    #[arg(long, value_delimiter = ',', num_args = 1..=3, default_value = "64")]
    pub size: Vec<usize>,
    /// Phantom family; cycles through all kinds when omitted.
    #[arg(long)]
    pub kind: Option<PhantomKind>,
    /// Training volumes; defaults to three quarters of `count`.
    #[arg(long)]
    pub train: Option<usize>,
    #[arg(long, default_value_t = 2)]
    pub r: usize,
    #[arg(long, default_value_t = Axes::Xy)]
    pub axes: Axes,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    /// Dataset manifest (JSON).
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Override the manifest's scale factor.
    #[arg(long)]
    pub r: Option<usize>,
    /// Override the manifest's degraded axes.
    #[arg(long)]
    pub axes: Option<Axes>,
    /// Overwrite an existing output directory.
    #[arg(long)]
    pub force: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Stage {
    /// In-plane network, trained on axial slices.
    Xy,
    /// Depth network, trained on coronal and sagittal planes.
    Z,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Xy => "xy",
            Stage::Z => "z",
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Directory written by `prepare`.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum)]
    pub stage: Stage,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 32)]
    pub filters: usize,
    #[arg(long, default_value_t = 7)]
    pub patch_size: usize,
    #[arg(long, default_value_t = 128)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 40)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr_initial: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub lr_final: f64,
    /// Epochs at the initial rate; defaults to half of `epochs`.
    #[arg(long)]
    pub lr_drop_epoch: Option<usize>,
    /// Weight of the intermediate-output loss.
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.5)]
    pub blur_probability: f64,
    #[arg(long, default_value_t = 0.5)]
    pub sigma_max: f64,
    #[arg(long)]
    pub fixed_sigma: Option<f64>,
    #[arg(long, default_value_t = 3)]
    pub stride: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Keep an evenly spaced subset of at most this many patches.
    #[arg(long)]
    pub max_patches: Option<usize>,
    #[arg(long)]
    pub no_second_block: bool,
    #[arg(long)]
    pub no_intermediate_loss: bool,
    #[arg(long)]
    pub no_short_skips: bool,
    #[arg(long)]
    pub no_long_skip: bool,
    #[arg(long)]
    pub relu_before_shuffle: bool,
    #[arg(long)]
    pub relu_on_output: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Raw,
    Png8,
    Png16,
}

impl From<OutputFormat> for VolumeFormat {
    fn from(f: OutputFormat) -> Self {
        match f {
            OutputFormat::Raw => VolumeFormat::Raw,
            OutputFormat::Png8 => VolumeFormat::Png8,
            OutputFormat::Png16 => VolumeFormat::Png16,
        }
    }
}

#[derive(Debug, Args)]
pub struct InferArgs {
    /// Raw sidecar (.json/.f32) or PNG stack directory.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub xy: Option<PathBuf>,
    #[arg(long)]
    pub z: Option<PathBuf>,
    /// Axes to upscale; inferred from the checkpoints given when omitted.
    #[arg(long)]
    pub axes: Option<Axes>,
    /// Median of the eight dihedral passes (in-plane stage only).
    #[arg(long)]
    pub ensemble: bool,
    #[arg(long, value_enum, default_value_t = OutputFormat::Raw)]
    pub format: OutputFormat,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Slices,
    Volumes,
}

impl From<ModeArg> for EvalMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Slices => EvalMode::Slices,
            ModeArg::Volumes => EvalMode::Volumes,
        }
    }
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Directory written by `prepare`.
    #[arg(long)]
    pub data: PathBuf,
    /// identity, nearest, bilinear, bicubic, lanczos, cnn. Defaults to the
    /// interpolation baselines plus cnn when a checkpoint is given.
    #[arg(long, value_delimiter = ',')]
    pub methods: Vec<String>,
    #[arg(long)]
    pub xy: Option<PathBuf>,
    #[arg(long)]
    pub z: Option<PathBuf>,
    #[arg(long)]
    pub ensemble: bool,
    #[arg(long, value_enum, default_value_t = ModeArg::Slices)]
    pub mode: ModeArg,
    #[arg(long)]
    pub out: PathBuf,
    /// PSNR peak for `[0, 1]` intensities.
    #[arg(long, default_value_t = 1.0)]
    pub peak: f64,
    /// Score 8-bit rounded images instead of floats.
    #[arg(long)]
    pub quantize_8bit: bool,
    /// Also write a side-by-side figure of each volume's middle slice.
    #[arg(long)]
    pub figures: bool,
}

#[derive(Debug, Args)]
pub struct StudyPrepareArgs {
    /// Directory written by `prepare`; its test volumes supply the slices.
    #[arg(long)]
    pub data: PathBuf,
    /// In-plane checkpoint; its scale sets the study factor.
    #[arg(long)]
    pub xy: PathBuf,
    #[arg(long, default_value_t = ResizeMethod::Lanczos)]
    pub baseline: ResizeMethod,
    /// Study material root; pairs go under `x{factor}/`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub pairs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub ensemble: bool,
    /// Replace an existing `x{factor}` directory.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct StudyServeArgs {
    #[arg(long)]
    pub results: PathBuf,
    /// Append-only JSONL vote log.
    #[arg(long, default_value = "votes.jsonl")]
    pub votes: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub bind: SocketAddr,
    /// Keys pair order and side assignment.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct StudyReportArgs {
    #[arg(long, default_value = "votes.jsonl")]
    pub votes: PathBuf,
    /// Print JSON instead of the table.
    #[arg(long)]
    pub json: bool,
}
