use std::fmt;

use serde::{Deserialize, Serialize};

use super::joint::Joint;
use crate::error::{Error, Result};
use crate::geometry::BBox;

/// Identity assigned by the tracker. Never reused within a sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TrackId(pub u64);

impl fmt::Display for TrackId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keypoint {
    pub joint: Joint,
    pub x: f64,
    pub y: f64,
    pub confidence: f64,
    /// False when the joint was never annotated or has been pruned.
    pub present: bool,
}

impl Keypoint {
    pub fn new(joint: Joint, x: f64, y: f64, confidence: f64) -> Self {
        Keypoint { joint, x, y, confidence, present: true }
    }

    pub fn absent(joint: Joint) -> Self {
        Keypoint { joint, x: 0.0, y: 0.0, confidence: 0.0, present: false }
    }

    pub fn distance(&self, other: &Keypoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// A person candidate: one keypoint slot per joint plus detection metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Pose {
    keypoints: [Keypoint; Joint::COUNT],
    pub det_score: f64,
    pub bbox: Option<BBox>,
    pub track_id: Option<TrackId>,
}

impl Pose {
    /// Builds a pose by asking `f` for each joint's keypoint. The `joint`
    /// field of the returned keypoint is overwritten with the slot's joint.
    pub fn from_fn(det_score: f64, mut f: impl FnMut(Joint) -> Keypoint) -> Self {
        let keypoints = std::array::from_fn(|i| {
            let joint = Joint::ALL[i];
            Keypoint { joint, ..f(joint) }
        });
        Pose { keypoints, det_score, bbox: None, track_id: None }
    }

    /// A pose with every keypoint absent.
    pub fn empty(det_score: f64) -> Self {
        Pose::from_fn(det_score, Keypoint::absent)
    }

    /// Builds a pose from keypoints in any order; each joint must appear once.
    pub fn from_keypoints(det_score: f64, keypoints: impl IntoIterator<Item = Keypoint>) -> Result<Self> {
        let mut slots: [Option<Keypoint>; Joint::COUNT] = [None; Joint::COUNT];
        for kp in keypoints {
            let slot = &mut slots[kp.joint.index()];
            if slot.is_some() {
                return Err(Error::invalid(format!("joint `{}` given twice", kp.joint)));
            }
            *slot = Some(kp);
        }
        if let Some(i) = slots.iter().position(Option::is_none) {
            return Err(Error::invalid(format!("joint `{}` missing", Joint::ALL[i])));
        }
        Ok(Pose::from_fn(det_score, |j| slots[j.index()].expect("checked above")))
    }

    pub fn keypoints(&self) -> &[Keypoint; Joint::COUNT] {
        &self.keypoints
    }

    pub fn keypoint(&self, joint: Joint) -> &Keypoint {
        &self.keypoints[joint.index()]
    }

    pub fn keypoint_mut(&mut self, joint: Joint) -> &mut Keypoint {
        &mut self.keypoints[joint.index()]
    }

    /// Applies `f` to every keypoint slot. The slot's joint is preserved.
    pub fn for_each_keypoint_mut(&mut self, mut f: impl FnMut(&mut Keypoint)) {
        for kp in &mut self.keypoints {
            let joint = kp.joint;
            f(kp);
            kp.joint = joint;
        }
    }

    pub fn present_keypoints(&self) -> impl Iterator<Item = &Keypoint> {
        self.keypoints.iter().filter(|kp| kp.present)
    }

    pub fn present_count(&self) -> usize {
        self.present_keypoints().count()
    }

    /// Shifts every keypoint and the box by `(dx, dy)`.
    pub fn translated(&self, dx: f64, dy: f64) -> Pose {
        let mut out = self.clone();
        out.for_each_keypoint_mut(|kp| {
            kp.x += dx;
            kp.y += dy;
        });
        out.bbox = self.bbox.map(|b| b.translated(dx, dy));
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub index: u64,
    pub width: u32,
    pub height: u32,
    pub poses: Vec<Pose>,
}

impl Frame {
    pub fn new(index: u64, width: u32, height: u32) -> Self {
        Frame { index, width, height, poses: Vec::new() }
    }

    /// Same frame header, different poses.
    pub fn with_poses(&self, poses: Vec<Pose>) -> Frame {
        Frame { index: self.index, width: self.width, height: self.height, poses }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub name: String,
    pub frames: Vec<Frame>,
}

impl Sequence {
    /// Validates frame ordering and dimensions.
    pub fn new(name: impl Into<String>, frames: Vec<Frame>) -> Result<Self> {
        let seq = Sequence { name: name.into(), frames };
        seq.validate()?;
        Ok(seq)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, pair) in self.frames.windows(2).enumerate() {
            if pair[1].index <= pair[0].index {
                return Err(Error::parse(
                    format!("frames[{}].index", i + 1),
                    format!("frame index {} does not follow {}", pair[1].index, pair[0].index),
                ));
            }
            if (pair[1].width, pair[1].height) != (pair[0].width, pair[0].height) {
                return Err(Error::parse(
                    format!("frames[{}]", i + 1),
                    format!(
                        "frame size {}x{} differs from {}x{}",
                        pair[1].width, pair[1].height, pair[0].width, pair[0].height
                    ),
                ));
            }
        }
        Ok(())
    }

    pub fn poses(&self) -> impl Iterator<Item = &Pose> {
        self.frames.iter().flat_map(|f| f.poses.iter())
    }

    /// Applies `f` to every pose, keeping frame structure.
    pub fn map_poses(&self, mut f: impl FnMut(&Pose) -> Pose) -> Sequence {
        Sequence {
            name: self.name.clone(),
            frames: self.frames.iter().map(|fr| fr.with_poses(fr.poses.iter().map(&mut f).collect())).collect(),
        }
    }

    /// Removes track ids from every pose.
    pub fn without_track_ids(&self) -> Sequence {
        self.map_poses(|p| Pose { track_id: None, ..p.clone() })
    }
}
