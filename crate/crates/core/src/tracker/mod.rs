//! Frame-to-frame pose association.
//!
//! Tracking starts on the first frame of a sequence: every pose there gets a
//! fresh id. On each later frame the live tracks are scored against the
//! frame's poses, the assignment problem over `1 - similarity` is solved, and
//! pairs at or above `sigma_min` inherit the track id. Unclaimed poses open
//! new tracks. A track not matched for more than `retention_window` frames
//! (by frame index) is discarded and its id is never handed out again.

mod assignment;
mod pruning;
mod similarity;

use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize};

pub use assignment::{solve_assignment, AssignmentMethod, CostMatrix};
pub use pruning::{prune_keypoints, prune_sequence, retention_stats, RetentionTable};
pub use similarity::{pose_similarity, BoxKeypointSimilarity, PoseSimilarity};

use crate::error::{Error, Result};
use crate::model::{Frame, PerJoint, Pose, Sequence, TrackId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerConfig {
    pub w_iou: f64,
    pub w_pose: f64,
    /// Minimum similarity for a track to claim a pose.
    pub sigma_min: f64,
    /// Frames a track may go unmatched before it is discarded.
    pub retention_window: u64,
    pub method: AssignmentMethod,
    /// Keypoints below this confidence are dropped after association.
    pub keypoint_drop_threshold: f64,
    /// Per-joint kernel width, relative to the square root of the track's box area.
    /// Accepts a single number in config files.
    #[serde(deserialize_with = "uniform_or_per_joint")]
    pub kappa: PerJoint<f64>,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            w_iou: 1.0,
            w_pose: 1.0,
            sigma_min: 0.3,
            retention_window: 8,
            method: AssignmentMethod::Hungarian,
            keypoint_drop_threshold: 0.5,
            kappa: PerJoint::uniform(0.1),
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.w_iou >= 0.0 && self.w_pose >= 0.0 && self.w_iou + self.w_pose > 0.0) {
            return Err(Error::invalid(format!(
                "similarity weights ({}, {}) must be non-negative with a positive sum",
                self.w_iou, self.w_pose
            )));
        }
        for (name, v) in [("sigma_min", self.sigma_min), ("keypoint_drop_threshold", self.keypoint_drop_threshold)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("{name} = {v} outside [0, 1]")));
            }
        }
        if self.retention_window < 1 {
            return Err(Error::invalid("retention_window must be at least 1 frame"));
        }
        if let Some((j, k)) = self.kappa.iter().find(|(_, k)| !(k.is_finite() && **k > 0.0)) {
            return Err(Error::invalid(format!("kappa for {j} = {k} must be positive")));
        }
        Ok(())
    }
}

fn uniform_or_per_joint<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<PerJoint<f64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Kappa {
        Uniform(f64),
        PerJoint(PerJoint<f64>),
    }
    Ok(match Kappa::deserialize(d)? {
        Kappa::Uniform(k) => PerJoint::uniform(k),
        Kappa::PerJoint(p) => p,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActiveTrack {
    pub pose: Pose,
    pub last_frame: u64,
}

/// Live id table.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrackerState {
    next_id: u64,
    active: BTreeMap<TrackId, ActiveTrack>,
}

impl TrackerState {
    pub fn next_id(&self) -> u64 {
        self.next_id
    }

    pub fn active(&self) -> &BTreeMap<TrackId, ActiveTrack> {
        &self.active
    }

    fn fresh_id(&mut self) -> TrackId {
        let id = TrackId(self.next_id);
        self.next_id += 1;
        id
    }

    fn expire(&mut self, frame: u64, window: u64) {
        self.active.retain(|_, t| frame.saturating_sub(t.last_frame) <= window);
    }
}

/// Incremental tracker over one sequence.
pub struct Tracker<'a> {
    config: TrackerConfig,
    similarity: Box<dyn PoseSimilarity + 'a>,
    state: TrackerState,
}

impl<'a> Tracker<'a> {
    pub fn new(config: TrackerConfig) -> Result<Self> {
        config.validate()?;
        let similarity = Box::new(BoxKeypointSimilarity::from_config(&config));
        Ok(Tracker { config, similarity, state: TrackerState::default() })
    }

    /// Uses a caller-supplied similarity in place of the box/keypoint blend.
    pub fn with_similarity(config: TrackerConfig, similarity: impl PoseSimilarity + 'a) -> Result<Self> {
        config.validate()?;
        Ok(Tracker { config, similarity: Box::new(similarity), state: TrackerState::default() })
    }

    pub fn state(&self) -> &TrackerState {
        &self.state
    }

    /// Assigns ids to one frame's poses. Existing ids on the input are replaced.
    pub fn step(&mut self, frame: &Frame) -> Result<Frame> {
        self.state.expire(frame.index, self.config.retention_window);

        let track_ids: Vec<TrackId> = self.state.active.keys().copied().collect();
        let mut assigned: Vec<Option<TrackId>> = vec![None; frame.poses.len()];

        if !track_ids.is_empty() && !frame.poses.is_empty() {
            let mut sims = Vec::with_capacity(track_ids.len() * frame.poses.len());
            for id in &track_ids {
                let track = &self.state.active[id].pose;
                for pose in &frame.poses {
                    sims.push(self.similarity.similarity(track, pose)?);
                }
            }
            let cost = CostMatrix::new(track_ids.len(), frame.poses.len(), sims.iter().map(|s| 1.0 - s).collect())?;
            for (r, c) in solve_assignment(&cost, self.config.method) {
                if sims[r * frame.poses.len() + c] >= self.config.sigma_min {
                    assigned[c] = Some(track_ids[r]);
                }
            }
        }

        let mut poses = Vec::with_capacity(frame.poses.len());
        for (pose, slot) in frame.poses.iter().zip(assigned) {
            let id = slot.unwrap_or_else(|| self.state.fresh_id());
            let mut out = pose.clone();
            out.track_id = Some(id);
            self.state.active.insert(id, ActiveTrack { pose: out.clone(), last_frame: frame.index });
            poses.push(out);
        }
        Ok(frame.with_poses(poses))
    }
}

/// Tracks a whole sequence with the default similarity.
pub fn track_sequence(seq: &Sequence, config: &TrackerConfig) -> Result<Sequence> {
    let mut tracker = Tracker::new(config.clone())?;
    track_with(seq, &mut tracker)
}

/// Tracks a whole sequence with a custom similarity.
pub fn track_sequence_with(
    seq: &Sequence,
    config: &TrackerConfig,
    similarity: impl PoseSimilarity,
) -> Result<Sequence> {
    let mut tracker = Tracker::with_similarity(config.clone(), similarity)?;
    track_with(seq, &mut tracker)
}

fn track_with(seq: &Sequence, tracker: &mut Tracker<'_>) -> Result<Sequence> {
    let frames = seq.frames.iter().map(|f| tracker.step(f)).collect::<Result<Vec<_>>>()?;
    Ok(Sequence { name: seq.name.clone(), frames })
}
