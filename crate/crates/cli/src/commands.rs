use std::path::{Path, PathBuf};

use serde::Serialize;
use topdown_core::ensemble::{EnsembleMode, ExpertMap};
use topdown_core::geometry::bbox_from_keypoints;
use topdown_core::heatmap::{cross_heatmap_nms_with, decode_argmax_with, DecodeOptions, HeatmapStack};
use topdown_core::metrics::{ap_csv, evaluate_ap, evaluate_mot, mot_csv};
use topdown_core::model::{load_sequence, save_predictions};
use topdown_core::pipeline::{parse_config, run_pipeline, sweep, PipelineConfig, PipelineInput};
use topdown_core::synth::{generate, SynthSpec};
use topdown_core::{Error, Keypoint, Sequence};

use crate::args::{
    BboxInferArgs, Cli, Command, DecodeArgs, EnsembleArgs, EvalArgs, EvalMode, FuseArg, PipelineArgs, SweepArgs,
    SynthArgs,
};
use crate::error::{CliError, CliResult};
use crate::output::{read_text, Outputs};

const DEFAULT_OUT: &str = "out";

pub fn execute(cli: &Cli) -> CliResult<()> {
    let cfg = load_config(cli.config.as_deref())?;
    match &cli.command {
        Command::Run(args) => run(cli, cfg, &args.pipeline),
        Command::Sweep(args) => run_sweep(cli, cfg, args),
        Command::Synth(args) => synth(cli, &cfg, args),
        Command::Eval(args) => eval(cli, &cfg, args),
        Command::Decode(args) => decode(cli, &cfg, args),
        Command::BboxInfer(args) => bbox_infer(cli, &cfg, args),
        Command::Ensemble(args) => ensemble(cli, &cfg, args),
    }
}

/// The config file, or defaults. Anything wrong with the file, including
/// out-of-range values, is attributed to it.
fn load_config(path: Option<&Path>) -> CliResult<PipelineConfig> {
    let Some(path) = path else {
        return Ok(PipelineConfig::default());
    };
    parse_config(&read_text(path)?).map_err(|e| CliError::in_file(path, e))
}

fn load_synth_spec(path: &Path) -> CliResult<SynthSpec> {
    let text = read_text(path)?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    let spec: SynthSpec = serde_path_to_error::deserialize(de)
        .map_err(|e| CliError::Parse { path: path.to_path_buf(), message: format!("{}: {}", e.path(), e.inner()) })?;
    spec.validate().map_err(|e| CliError::in_file(path, e))?;
    Ok(spec)
}

fn load_sequences(paths: &[PathBuf]) -> CliResult<Vec<Sequence>> {
    paths.iter().map(|p| load_sequence(&read_text(p)?).map_err(|e| CliError::in_file(p, e))).collect()
}

fn out_dir(cli: &Cli, cfg: &PipelineConfig) -> PathBuf {
    cli.out.clone().or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

/// Applies flag overrides; flags win over the config file.
fn resolve(cli: &Cli, mut cfg: PipelineConfig, args: &PipelineArgs) -> CliResult<PipelineConfig> {
    if !args.predictions.is_empty() {
        cfg.inputs.predictions = args.predictions.clone();
        cfg.synth = None;
    }
    if !args.predictions_b.is_empty() {
        cfg.inputs.predictions_b = args.predictions_b.clone();
    }
    if !args.ground_truth.is_empty() {
        cfg.inputs.ground_truth = args.ground_truth.clone();
    }
    if let Some(path) = &args.synth {
        cfg.synth = Some(load_synth_spec(path)?);
    }
    if let Some(seed) = cli.seed {
        match cfg.synth.as_mut() {
            Some(spec) => spec.seed = seed,
            None => log::warn!("--seed ignored: input is not synthetic"),
        }
    }
    if let Some(v) = args.candidate_threshold {
        cfg.candidate_threshold = v;
    }
    if let Some(v) = args.keypoint_threshold {
        cfg.tracker.keypoint_drop_threshold = v;
    }
    if let Some(v) = args.nms_iou {
        cfg.nms_iou_threshold = v;
    }
    if let Some(m) = args.method {
        cfg.tracker.method = m.into();
    }
    if let Some(w) = args.window {
        cfg.tracker.retention_window = w;
    }
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

fn pipeline_input(cfg: &PipelineConfig) -> CliResult<PipelineInput> {
    if let Some(spec) = &cfg.synth {
        return Ok(PipelineInput::from_synth(spec)?);
    }
    if cfg.inputs.predictions.is_empty() || cfg.inputs.ground_truth.is_empty() {
        return Err(CliError::Usage(
            "no input: give --predictions and --ground-truth, --synth, or a config with inputs or synth".into(),
        ));
    }
    let predictions_b =
        if cfg.inputs.predictions_b.is_empty() { None } else { Some(load_sequences(&cfg.inputs.predictions_b)?) };
    Ok(PipelineInput {
        predictions: load_sequences(&cfg.inputs.predictions)?,
        predictions_b,
        ground_truth: load_sequences(&cfg.inputs.ground_truth)?,
    })
}

fn tracked_file(seq: &Sequence) -> String {
    format!("tracked/{}.json", seq.name)
}

fn sequence_text(seq: &Sequence) -> String {
    let mut text = save_predictions(seq);
    text.push('\n');
    text
}

fn run(cli: &Cli, cfg: PipelineConfig, args: &PipelineArgs) -> CliResult<()> {
    let cfg = resolve(cli, cfg, args)?;
    let input = pipeline_input(&cfg)?;
    let result = run_pipeline(&cfg, &input)?;
    let report = &result.report;

    let mut out = Outputs::default();
    let (ap, mot) = (ap_csv(&report.ap), mot_csv(&report.mot));
    out.add("ap.csv", ap.clone());
    out.add("mot.csv", mot.clone());
    out.add_json("report.json", report);
    out.add_json("config.json", &cfg);
    for seq in &result.tracked {
        out.add(tracked_file(seq), sequence_text(seq));
    }
    out.write_to(&out_dir(cli, &cfg))?;
    print!("{ap}\n{mot}");
    Ok(())
}

fn run_sweep(cli: &Cli, cfg: PipelineConfig, args: &SweepArgs) -> CliResult<()> {
    if args.values.len() < 2 {
        return Err(CliError::Usage(format!("a sweep needs at least 2 values, got {}", args.values.len())));
    }
    if let Some(v) = args.values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(CliError::Usage(format!("sweep value {v} outside [0, 1]")));
    }
    let cfg = resolve(cli, cfg, &args.pipeline)?;
    let input = pipeline_input(&cfg)?;
    let table = sweep(&cfg, &input, args.axis.into(), &args.values, cli.jobs)?;

    let csv = table.to_csv();
    let mut out = Outputs::default();
    out.add("sweep.csv", csv.clone());
    out.add_json("sweep.json", &table);
    out.add_json("config.json", &cfg);
    out.write_to(&out_dir(cli, &cfg))?;
    print!("{csv}");
    Ok(())
}

fn synth(cli: &Cli, cfg: &PipelineConfig, args: &SynthArgs) -> CliResult<()> {
    let mut spec = match &args.spec {
        Some(path) => load_synth_spec(path)?,
        None => cfg.synth.clone().unwrap_or_default(),
    };
    if let Some(seed) = cli.seed {
        spec.seed = seed;
    }
    let generated = generate(&spec)?;
    let mut out = Outputs::default();
    out.add(format!("{}.det.json", spec.name), sequence_text(&generated.det));
    out.add(format!("{}.gt.json", spec.name), sequence_text(&generated.gt));
    out.add(format!("{}.provenance.json", spec.name), generated.provenance_json() + "\n");
    out.add_json(format!("{}.spec.json", spec.name), &spec);
    for path in out.write_to(&out_dir(cli, cfg))? {
        println!("{}", path.display());
    }
    Ok(())
}

fn eval(cli: &Cli, cfg: &PipelineConfig, args: &EvalArgs) -> CliResult<()> {
    let preds = load_sequences(&args.predictions)?;
    let gts = load_sequences(&args.ground_truth)?;
    let mut out = Outputs::default();
    let mut printed = String::new();
    if matches!(args.mode, EvalMode::Ap | EvalMode::Both) {
        let report = evaluate_ap(&preds, &gts, &cfg.pckh)?;
        printed += &ap_csv(&report);
        out.add("ap.csv", ap_csv(&report));
        out.add_json("ap.json", &report);
    }
    if matches!(args.mode, EvalMode::Mot | EvalMode::Both) {
        let report = evaluate_mot(&preds, &gts, &cfg.pckh)?;
        printed += &mot_csv(&report);
        out.add("mot.csv", mot_csv(&report));
        out.add_json("mot.json", &report);
    }
    out.write_to(&out_dir(cli, cfg))?;
    print!("{printed}");
    Ok(())
}

#[derive(Serialize)]
struct DecodedKeypoint {
    joint: &'static str,
    x: f64,
    y: f64,
    confidence: f64,
}

impl From<&Keypoint> for DecodedKeypoint {
    fn from(k: &Keypoint) -> Self {
        DecodedKeypoint { joint: k.joint.name(), x: k.x, y: k.y, confidence: k.confidence }
    }
}

#[derive(Serialize)]
struct Decoded {
    keypoints: Vec<DecodedKeypoint>,
    /// Joints that fell back to argmax because every peak was suppressed.
    fallbacks: Vec<&'static str>,
}

fn decode(cli: &Cli, cfg: &PipelineConfig, args: &DecodeArgs) -> CliResult<()> {
    if let Some(r) = args.radius {
        if !(r.is_finite() && r >= 0.0) {
            return Err(CliError::Usage(format!("--radius {r} must be a non-negative number")));
        }
    }
    let path = &args.heatmaps;
    let stack = HeatmapStack::from_json(&read_text(path)?).map_err(|e| CliError::in_file(path, e))?;
    let opts = DecodeOptions { refine: !args.no_refine };
    let decoded = match args.radius {
        Some(radius) => {
            let nms = cross_heatmap_nms_with(&stack, radius, opts)?;
            Decoded {
                keypoints: nms.keypoints.iter().map(Into::into).collect(),
                fallbacks: nms.fallbacks.iter().map(|j| j.name()).collect(),
            }
        }
        None => Decoded {
            keypoints: stack.maps().iter().map(|m| (&decode_argmax_with(m, stack.origin, opts)).into()).collect(),
            fallbacks: Vec::new(),
        },
    };
    let mut out = Outputs::default();
    out.add_json("decoded.json", &decoded);
    out.write_to(&out_dir(cli, cfg))?;
    Ok(())
}

fn bbox_infer(cli: &Cli, cfg: &PipelineConfig, args: &BboxInferArgs) -> CliResult<()> {
    if !(args.enlarge.is_finite() && args.enlarge >= 0.0) {
        return Err(CliError::Usage(format!("--enlarge {} must be a non-negative number", args.enlarge)));
    }
    let mut seq = load_sequences(std::slice::from_ref(&args.input))?.remove(0);
    for frame in &mut seq.frames {
        for (i, pose) in frame.poses.iter_mut().enumerate() {
            let bbox = bbox_from_keypoints(pose, args.enlarge).map_err(|e| {
                Error::Degenerate(format!("sequence '{}', frame {}, pose {i}: {e}", seq.name, frame.index))
            })?;
            pose.bbox = Some(bbox);
        }
    }
    let mut out = Outputs::default();
    out.add(format!("{}.json", seq.name), sequence_text(&seq));
    out.write_to(&out_dir(cli, cfg))?;
    Ok(())
}

fn ensemble(cli: &Cli, cfg: &PipelineConfig, args: &EnsembleArgs) -> CliResult<()> {
    let mode = match args.mode {
        Some(FuseArg::Average) => EnsembleMode::Average,
        Some(FuseArg::Expert) => match cfg.ensemble {
            m @ EnsembleMode::Expert { .. } => m,
            _ => EnsembleMode::Expert { expert_map: ExpertMap::default() },
        },
        None => match cfg.ensemble {
            EnsembleMode::None => EnsembleMode::Expert { expert_map: ExpertMap::default() },
            m => m,
        },
    };
    let a = load_sequences(std::slice::from_ref(&args.a))?.remove(0);
    let b = load_sequences(std::slice::from_ref(&args.b))?.remove(0);
    let paired = a.frames.len() == b.frames.len()
        && a.frames.iter().zip(&b.frames).all(|(x, y)| x.index == y.index && x.poses.len() == y.poses.len());
    if !paired {
        return Err(Error::Misaligned(format!(
            "'{}' and '{}' do not pair pose for pose",
            args.a.display(),
            args.b.display()
        ))
        .into());
    }
    let frames = a
        .frames
        .iter()
        .zip(&b.frames)
        .map(|(fa, fb)| fa.with_poses(fa.poses.iter().zip(&fb.poses).map(|(p, q)| mode.fuse(p, q)).collect()))
        .collect();
    let fused = Sequence::new(a.name.clone(), frames)?;
    let mut out = Outputs::default();
    out.add(format!("{}.json", fused.name), sequence_text(&fused));
    out.write_to(&out_dir(cli, cfg))?;
    Ok(())
}
