use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::{EvalGroup, GroupValues, Pose, Sequence};

/// Marks keypoints with `confidence < threshold` as absent. Kept keypoints
/// are untouched.
pub fn prune_keypoints(pose: &Pose, threshold: f64) -> Pose {
    let mut out = pose.clone();
    out.for_each_keypoint_mut(|kp| {
        if kp.confidence < threshold {
            kp.present = false;
        }
    });
    out
}

pub fn prune_sequence(seq: &Sequence, threshold: f64) -> Sequence {
    seq.map_poses(|p| prune_keypoints(p, threshold))
}

/// Share of present keypoints that survive pruning, per group and overall.
#[derive(Debug, Clone, PartialEq)]
pub struct RetentionTable {
    pub threshold: f64,
    pub kept: GroupValues<usize>,
    pub total: GroupValues<usize>,
}

impl RetentionTable {
    /// Percentage kept in `group`, `None` when the group had no keypoints.
    pub fn percent(&self, group: EvalGroup) -> Option<f64> {
        let total = self.total[group];
        (total > 0).then(|| 100.0 * self.kept[group] as f64 / total as f64)
    }

    pub fn total_percent(&self) -> f64 {
        let kept: usize = self.kept.0.iter().sum();
        let total: usize = self.total.0.iter().sum();
        100.0 * kept as f64 / total as f64
    }

    pub fn percents(&self) -> GroupValues<Option<f64>> {
        GroupValues::from_fn(|g| self.percent(g))
    }
}

impl Serialize for RetentionTable {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Doc {
            threshold: f64,
            groups: GroupValues<Option<f64>>,
            #[serde(rename = "Total")]
            total: f64,
        }
        Doc { threshold: self.threshold, groups: self.percents(), total: self.total_percent() }.serialize(serializer)
    }
}

/// Keypoint retention after pruning at `threshold`, counted over every
/// present keypoint of every pose.
pub fn retention_stats(seqs: &[Sequence], threshold: f64) -> Result<RetentionTable> {
    let mut kept = GroupValues::<usize>::default();
    let mut total = GroupValues::<usize>::default();
    for kp in seqs.iter().flat_map(|s| s.poses()).flat_map(|p| p.present_keypoints()) {
        let g = kp.joint.group();
        total[g] += 1;
        if kp.confidence >= threshold {
            kept[g] += 1;
        }
    }
    if total.0.iter().all(|&n| n == 0) {
        return Err(Error::invalid("no present keypoints to compute retention over"));
    }
    Ok(RetentionTable { threshold, kept, total })
}
