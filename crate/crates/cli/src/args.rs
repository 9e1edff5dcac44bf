use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use topdown_core::pipeline::SweepAxis;
use topdown_core::tracker::AssignmentMethod;

/// Top-down multi-person pose tracking: pipeline runs, threshold sweeps,
/// synthetic benchmarks and evaluation.
///
/// Settings resolve as command-line flags, then the `--config` file, then
/// built-in defaults. Log verbosity follows `TOPDOWN_LOG` (e.g. `info`).
#[derive(Debug, Parser)]
#[command(name = "topdown", version)]
pub struct Cli {
    /// Pipeline config document (JSON, `"schema": 1`).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Worker threads for sweeps; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0, value_name = "N")]
    pub jobs: usize,

    /// Overrides the synthetic generator seed.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,

    /// Output directory; falls back to the config's `output`, then `out`.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Prune, suppress, fuse, track, prune keypoints, then score.
    Run(RunArgs),
    /// Repeat `run` over a list of threshold values.
    Sweep(SweepArgs),
    /// Generate synthetic detections, ground truth and provenance.
    Synth(SynthArgs),
    /// Score tracked predictions against ground truth.
    Eval(EvalArgs),
    /// Decode one candidate's heatmaps into keypoints.
    Decode(DecodeArgs),
    /// Fill every pose's box from its keypoints.
    BboxInfer(BboxInferArgs),
    /// Fuse two models' predictions pose for pose.
    Ensemble(EnsembleArgs),
}

/// Pipeline overrides shared by `run` and `sweep`.
#[derive(Debug, Args, Default)]
pub struct PipelineArgs {
    /// Detection files, one sequence each. Replaces any synthetic input.
    #[arg(long, num_args = 1.., value_name = "PATH")]
    pub predictions: Vec<PathBuf>,

    /// Second model's detection files, for the fusing ensemble modes.
    #[arg(long, num_args = 1.., value_name = "PATH")]
    pub predictions_b: Vec<PathBuf>,

    /// Ground-truth files, one sequence each.
    #[arg(long, num_args = 1.., value_name = "PATH")]
    pub ground_truth: Vec<PathBuf>,

    /// Synthetic spec document used as input.
    #[arg(long, value_name = "PATH", conflicts_with = "predictions")]
    pub synth: Option<PathBuf>,

    #[arg(long, value_name = "T")]
    pub candidate_threshold: Option<f64>,

    #[arg(long, value_name = "T")]
    pub keypoint_threshold: Option<f64>,

    #[arg(long, value_name = "T")]
    pub nms_iou: Option<f64>,

    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,

    /// Frames an unmatched track survives.
    #[arg(long, value_name = "FRAMES")]
    pub window: Option<u64>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub pipeline: PipelineArgs,

    #[arg(long, value_enum)]
    pub axis: AxisArg,

    /// Comma-separated thresholds, at least two.
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true, value_name = "T,T,...")]
    pub values: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Spec document; defaults to the config's `synth` section, then the calibrated spec.
    #[arg(long, value_name = "PATH")]
    pub spec: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, num_args = 1.., required = true, value_name = "PATH")]
    pub predictions: Vec<PathBuf>,

    #[arg(long, num_args = 1.., required = true, value_name = "PATH")]
    pub ground_truth: Vec<PathBuf>,

    #[arg(long, value_enum, default_value_t = EvalMode::Both)]
    pub mode: EvalMode,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    /// Heatmap stack document.
    #[arg(long, value_name = "PATH")]
    pub heatmaps: PathBuf,

    /// Cross-heatmap suppression radius in pixels; plain argmax when absent.
    #[arg(long, value_name = "PX")]
    pub radius: Option<f64>,

    /// Report cell centres without quarter-cell refinement.
    #[arg(long)]
    pub no_refine: bool,
}

#[derive(Debug, Args)]
pub struct BboxInferArgs {
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,

    /// Relative growth of the keypoint extent.
    #[arg(long, default_value_t = topdown_core::geometry::DEFAULT_ENLARGE, value_name = "RATIO")]
    pub enlarge: f64,
}

#[derive(Debug, Args)]
pub struct EnsembleArgs {
    #[arg(long, value_name = "PATH")]
    pub a: PathBuf,

    #[arg(long, value_name = "PATH")]
    pub b: PathBuf,

    /// Fusion rule; defaults to the config's ensemble, then `expert`.
    #[arg(long, value_enum)]
    pub mode: Option<FuseArg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AxisArg {
    #[value(alias = "bbox_threshold")]
    BboxThreshold,
    #[value(alias = "keypoint_threshold")]
    KeypointThreshold,
}

impl From<AxisArg> for SweepAxis {
    fn from(a: AxisArg) -> Self {
        match a {
            AxisArg::BboxThreshold => SweepAxis::BboxThreshold,
            AxisArg::KeypointThreshold => SweepAxis::KeypointThreshold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Greedy,
    Hungarian,
}

impl From<MethodArg> for AssignmentMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Greedy => AssignmentMethod::Greedy,
            MethodArg::Hungarian => AssignmentMethod::Hungarian,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalMode {
    Ap,
    Mot,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FuseArg {
    Average,
    Expert,
}
