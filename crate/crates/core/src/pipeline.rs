//! Detection pruning, NMS, fusion, tracking, keypoint pruning and scoring, end to end.

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::EnsembleMode;
use crate::error::{Error, Result};
use crate::geometry::{detection_pr, nms_indices, pose_box, PrResult, DETECTION_IOU_THRESHOLD};
use crate::metrics::{evaluate_ap, evaluate_mot, ApReport, MotReport, PckhThreshold};
use crate::model::{Frame, Sequence};
use crate::synth::{generate, SynthSpec};
use crate::tracker::{prune_sequence, track_sequence, TrackerConfig};

pub const CONFIG_SCHEMA: u32 = 1;

/// Input file locations; each file holds one sequence.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputPaths {
    pub predictions: Vec<PathBuf>,
    /// Second model's predictions, required by the fusing ensemble modes.
    pub predictions_b: Vec<PathBuf>,
    pub ground_truth: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub schema: u32,
    /// Candidates with a detection score below this are dropped.
    pub candidate_threshold: f64,
    pub nms_iou_threshold: f64,
    pub ensemble: EnsembleMode,
    /// Includes the keypoint drop threshold applied after tracking.
    pub tracker: TrackerConfig,
    pub pckh: PckhThreshold,
    pub inputs: InputPaths,
    /// When set, inputs are generated instead of read.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            schema: CONFIG_SCHEMA,
            candidate_threshold: 0.4,
            nms_iou_threshold: 0.5,
            ensemble: EnsembleMode::default(),
            tracker: TrackerConfig::default(),
            pckh: PckhThreshold::default(),
            inputs: InputPaths::default(),
            synth: None,
            output: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schema != CONFIG_SCHEMA {
            return Err(Error::invalid(format!(
                "unsupported config schema {} (expected {CONFIG_SCHEMA})",
                self.schema
            )));
        }
        for (name, v) in
            [("candidate_threshold", self.candidate_threshold), ("nms_iou_threshold", self.nms_iou_threshold)]
        {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("{name} {v} outside [0, 1]")));
            }
        }
        self.tracker.validate()?;
        self.pckh.validate()?;
        if let Some(spec) = &self.synth {
            spec.validate()?;
        }
        Ok(())
    }
}

/// Parses a config document, naming the offending field on failure.
pub fn parse_config(text: &str) -> Result<PipelineConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: PipelineConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::parse(if path == "." { "$".to_string() } else { path }, e.inner().to_string())
    })?;
    cfg.validate()?;
    Ok(cfg)
}

/// Loaded sequences for one run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PipelineInput {
    pub predictions: Vec<Sequence>,
    pub predictions_b: Option<Vec<Sequence>>,
    pub ground_truth: Vec<Sequence>,
}

impl PipelineInput {
    /// Detections and ground truth of one synthetic spec.
    pub fn from_synth(spec: &SynthSpec) -> Result<Self> {
        let out = generate(spec)?;
        Ok(PipelineInput { predictions: vec![out.det], predictions_b: None, ground_truth: vec![out.gt] })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub ap: ApReport,
    pub mot: MotReport,
    /// Candidate boxes after pruning and NMS against ground-truth boxes.
    pub detection: PrResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub tracked: Vec<Sequence>,
    pub report: RunReport,
}

fn check_paired(a: &Sequence, b: &Sequence) -> Result<()> {
    let paired = a.name == b.name
        && a.frames.len() == b.frames.len()
        && a.frames.iter().zip(&b.frames).all(|(x, y)| x.index == y.index && x.poses.len() == y.poses.len());
    if paired {
        Ok(())
    } else {
        Err(Error::Misaligned(format!(
            "second-model sequence '{}' does not pair pose-for-pose with '{}'",
            b.name, a.name
        )))
    }
}

/// Candidate indices that survive score pruning then NMS.
fn select_candidates(frame: &Frame, cfg: &PipelineConfig) -> Result<Vec<usize>> {
    let kept: Vec<usize> =
        (0..frame.poses.len()).filter(|&i| frame.poses[i].det_score >= cfg.candidate_threshold).collect();
    let boxed = kept
        .iter()
        .map(|&i| {
            let mut p = frame.poses[i].clone();
            p.bbox = Some(pose_box(&p)?);
            Ok(p)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(nms_indices(&boxed, cfg.nms_iou_threshold)?.into_iter().map(|k| kept[k]).collect())
}

/// Pruning and NMS (selection driven by the first model), then fusion.
fn candidates(seq: &Sequence, second: Option<&Sequence>, cfg: &PipelineConfig) -> Result<Sequence> {
    let frames = seq
        .frames
        .iter()
        .enumerate()
        .map(|(f, frame)| {
            let keep = select_candidates(frame, cfg)?;
            let poses = keep
                .iter()
                .map(|&i| match second {
                    Some(b) => cfg.ensemble.fuse(&frame.poses[i], &b.frames[f].poses[i]),
                    None => frame.poses[i].clone(),
                })
                .collect();
            Ok(frame.with_poses(poses))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Sequence { name: seq.name.clone(), frames })
}

fn detection_counts(preds: &[Sequence], gts: &[Sequence]) -> Result<PrResult> {
    let mut parts = Vec::new();
    for g in gts {
        let Some(p) = preds.iter().find(|p| p.name == g.name) else {
            return Err(Error::Misaligned(format!("no predictions for sequence '{}'", g.name)));
        };
        for (pf, gf) in p.frames.iter().zip(&g.frames) {
            let dets = pf.poses.iter().map(pose_box).collect::<Result<Vec<_>>>()?;
            let truth = gf.poses.iter().map(pose_box).collect::<Result<Vec<_>>>()?;
            parts.push(detection_pr(&dets, &truth, DETECTION_IOU_THRESHOLD));
        }
    }
    Ok(PrResult::combine(parts))
}

/// Runs the full pipeline on loaded inputs.
pub fn run_pipeline(cfg: &PipelineConfig, input: &PipelineInput) -> Result<RunOutput> {
    cfg.validate()?;
    let fusing = !matches!(cfg.ensemble, EnsembleMode::None);
    let second = match (&input.predictions_b, fusing) {
        (Some(b), true) => {
            if b.len() != input.predictions.len() {
                return Err(Error::Misaligned(format!(
                    "{} second-model sequences for {} first-model sequences",
                    b.len(),
                    input.predictions.len()
                )));
            }
            Some(b)
        }
        (None, true) => return Err(Error::invalid("ensemble mode needs second-model predictions")),
        (_, false) => None,
    };

    let mut selected = Vec::with_capacity(input.predictions.len());
    let mut tracked = Vec::with_capacity(input.predictions.len());
    for (k, seq) in input.predictions.iter().enumerate() {
        let b = second.map(|b| &b[k]);
        if let Some(b) = b {
            check_paired(seq, b)?;
        }
        let cands = candidates(seq, b, cfg)?;
        let with_ids = track_sequence(&cands, &cfg.tracker)?;
        log::debug!("sequence '{}': {} of {} candidates kept", seq.name, cands.poses().count(), seq.poses().count());
        tracked.push(prune_sequence(&with_ids, cfg.tracker.keypoint_drop_threshold));
        selected.push(cands);
    }

    let report = RunReport {
        ap: evaluate_ap(&tracked, &input.ground_truth, &cfg.pckh)?,
        mot: evaluate_mot(&tracked, &input.ground_truth, &cfg.pckh)?,
        detection: detection_counts(&selected, &input.ground_truth)?,
    };
    Ok(RunOutput { tracked, report })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Candidate drop threshold; reported as detection precision and recall.
    BboxThreshold,
    /// Keypoint drop threshold; reported as total AP and MOTA.
    KeypointThreshold,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::BboxThreshold => "bbox_threshold",
            SweepAxis::KeypointThreshold => "keypoint_threshold",
        }
    }

    fn apply(self, cfg: &PipelineConfig, value: f64) -> PipelineConfig {
        let mut out = cfg.clone();
        match self {
            SweepAxis::BboxThreshold => out.candidate_threshold = value,
            SweepAxis::KeypointThreshold => out.tracker.keypoint_drop_threshold = value,
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub report: RunReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub axis: SweepAxis,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// One row per value: `AP,MOTA` totals or detection `Prec,Rec`, in percent.
    pub fn to_csv(&self) -> String {
        let mut out = match self.axis {
            SweepAxis::KeypointThreshold => "threshold,AP,MOTA\n".to_string(),
            SweepAxis::BboxThreshold => "threshold,Prec,Rec\n".to_string(),
        };
        let cell = |v: Option<f64>| v.map_or_else(|| "nan".to_string(), |v| format!("{v:.1}"));
        for row in &self.rows {
            let (a, b) = match self.axis {
                SweepAxis::KeypointThreshold => (row.report.ap.total, row.report.mot.total_mota),
                SweepAxis::BboxThreshold => {
                    (Some(100.0 * row.report.detection.precision), Some(100.0 * row.report.detection.recall))
                }
            };
            out.push_str(&format!("{},{},{}\n", row.value, cell(a), cell(b)));
        }
        out
    }
}

/// Runs the pipeline once per value, up to `jobs` at a time (0 = all cores).
/// Rows follow the order of `values`.
pub fn sweep(
    cfg: &PipelineConfig,
    input: &PipelineInput,
    axis: SweepAxis,
    values: &[f64],
    jobs: usize,
) -> Result<SweepTable> {
    if values.len() < 2 {
        return Err(Error::invalid(format!("a sweep needs at least 2 values, got {}", values.len())));
    }
    if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::invalid(format!("sweep value {v} outside [0, 1]")));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    let rows = pool.install(|| {
        values
            .par_iter()
            .map(|&value| {
                let point = axis.apply(cfg, value);
                log::debug!("sweep point {}={value}", axis.name());
                run_pipeline(&point, input).map(|out| SweepRow { value, report: out.report })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(SweepTable { axis, rows })
}
