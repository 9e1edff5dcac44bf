//! Sequence JSON documents.
//!
//! ```json
//! {"name": "seq", "frames": [{"index": 0, "width": 1280, "height": 720, "poses": [
//!   {"det_score": 0.9, "track_id": 3, "bbox": [x1, y1, x2, y2],
//!    "keypoints": [{"joint": "nose", "x": 1.0, "y": 2.0, "confidence": 0.8, "present": true}, ...]}
//! ]}]}
//! ```
//!
//! A stored box carries coordinates only; on load its score is the pose's `det_score`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::joint::Joint;
use super::pose::{Frame, Keypoint, Pose, Sequence, TrackId};
use crate::error::{Error, Result};
use crate::geometry::BBox;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SequenceDoc {
    name: String,
    frames: Vec<FrameDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameDoc {
    index: u64,
    width: u32,
    height: u32,
    poses: Vec<PoseDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoseDoc {
    det_score: f64,
    #[serde(default)]
    track_id: Option<u64>,
    #[serde(default)]
    bbox: Option<[f64; 4]>,
    keypoints: Vec<KeypointDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KeypointDoc {
    joint: String,
    x: f64,
    y: f64,
    confidence: f64,
    present: bool,
}

/// Parses and validates a sequence document.
pub fn load_sequence(text: &str) -> Result<Sequence> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: SequenceDoc = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::parse(if path == "." { "$".to_string() } else { path }, e.into_inner().to_string())
    })?;
    from_doc(doc)
}

/// Serializes a sequence, including track ids where assigned.
pub fn save_predictions(seq: &Sequence) -> String {
    serde_json::to_string(&to_doc(seq)).expect("sequence documents always serialize")
}

/// Pretty-printed variant of [`save_predictions`].
pub fn save_predictions_pretty(seq: &Sequence) -> String {
    serde_json::to_string_pretty(&to_doc(seq)).expect("sequence documents always serialize")
}

fn unit_range(path: &str, what: &str, v: f64) -> Result<()> {
    if v.is_finite() && (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::parse(path, format!("{what} {v} outside [0, 1]")))
    }
}

fn finite(path: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::parse(path, format!("non-finite value {v}")))
    }
}

fn from_doc(doc: SequenceDoc) -> Result<Sequence> {
    let mut frames = Vec::with_capacity(doc.frames.len());
    let mut seen = BTreeSet::new();
    for (fi, fd) in doc.frames.into_iter().enumerate() {
        if !seen.insert(fd.index) {
            return Err(Error::parse(format!("frames[{fi}].index"), format!("duplicate frame index {}", fd.index)));
        }
        let mut poses = Vec::with_capacity(fd.poses.len());
        for (pi, pd) in fd.poses.into_iter().enumerate() {
            let base = format!("frames[{fi}].poses[{pi}]");
            poses.push(pose_from_doc(&base, pd)?);
        }
        frames.push(Frame { index: fd.index, width: fd.width, height: fd.height, poses });
    }
    Sequence::new(doc.name, frames)
}

fn pose_from_doc(base: &str, pd: PoseDoc) -> Result<Pose> {
    unit_range(&format!("{base}.det_score"), "det_score", pd.det_score)?;
    if pd.keypoints.len() != Joint::COUNT {
        return Err(Error::parse(
            format!("{base}.keypoints"),
            format!("expected {} keypoints, found {}", Joint::COUNT, pd.keypoints.len()),
        ));
    }
    let mut slots: [Option<Keypoint>; Joint::COUNT] = [None; Joint::COUNT];
    for (ki, kd) in pd.keypoints.into_iter().enumerate() {
        let path = format!("{base}.keypoints[{ki}]");
        let joint = Joint::from_name(&kd.joint)
            .ok_or_else(|| Error::parse(format!("{path}.joint"), format!("unknown joint `{}`", kd.joint)))?;
        finite(&format!("{path}.x"), kd.x)?;
        finite(&format!("{path}.y"), kd.y)?;
        unit_range(&format!("{path}.confidence"), "confidence", kd.confidence)?;
        let slot = &mut slots[joint.index()];
        if slot.is_some() {
            return Err(Error::parse(format!("{path}.joint"), format!("duplicate joint `{joint}`")));
        }
        *slot = Some(Keypoint { joint, x: kd.x, y: kd.y, confidence: kd.confidence, present: kd.present });
    }
    let mut pose = Pose::from_fn(pd.det_score, |j| slots[j.index()].expect("15 distinct joints"));
    if let Some([x1, y1, x2, y2]) = pd.bbox {
        pose.bbox = Some(
            BBox::new(x1, y1, x2, y2, pd.det_score).map_err(|e| Error::parse(format!("{base}.bbox"), e.to_string()))?,
        );
    }
    pose.track_id = pd.track_id.map(TrackId);
    Ok(pose)
}

fn to_doc(seq: &Sequence) -> SequenceDoc {
    SequenceDoc {
        name: seq.name.clone(),
        frames: seq
            .frames
            .iter()
            .map(|f| FrameDoc {
                index: f.index,
                width: f.width,
                height: f.height,
                poses: f.poses.iter().map(pose_to_doc).collect(),
            })
            .collect(),
    }
}

fn pose_to_doc(p: &Pose) -> PoseDoc {
    PoseDoc {
        det_score: p.det_score,
        track_id: p.track_id.map(|t| t.0),
        bbox: p.bbox.map(|b| [b.x1, b.y1, b.x2, b.y2]),
        keypoints: p
            .keypoints()
            .iter()
            .map(|kp| KeypointDoc {
                joint: kp.joint.name().to_string(),
                x: kp.x,
                y: kp.y,
                confidence: kp.confidence,
                present: kp.present,
            })
            .collect(),
    }
}
