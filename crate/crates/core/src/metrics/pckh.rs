use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::pose_box;
use crate::model::{Joint, Pose};
use crate::tracker::{solve_assignment, AssignmentMethod, CostMatrix};

/// Fraction of the box diagonal used as head size when head keypoints are missing.
pub const HEADLESS_DIAGONAL_FACTOR: f64 = 0.3;

/// PCKh distance normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PckhThreshold {
    /// A prediction is correct within `factor * head_size` of the ground truth.
    pub factor: f64,
    /// Lower clamp on the head size, in pixels.
    pub min_head_size: f64,
}

impl Default for PckhThreshold {
    fn default() -> Self {
        PckhThreshold { factor: 0.5, min_head_size: 1.0 }
    }
}

impl PckhThreshold {
    pub fn validate(&self) -> Result<()> {
        if !(self.factor.is_finite() && self.factor > 0.0) {
            return Err(Error::invalid(format!("PCKh factor {} must be positive", self.factor)));
        }
        if !(self.min_head_size.is_finite() && self.min_head_size > 0.0) {
            return Err(Error::invalid(format!("min_head_size {} must be positive", self.min_head_size)));
        }
        Ok(())
    }
}

/// Distance between head_top and head_bottom, clamped below by `min_head_size`.
pub fn head_size(pose: &Pose, t: &PckhThreshold) -> Result<f64> {
    let (top, bottom) = (pose.keypoint(Joint::HeadTop), pose.keypoint(Joint::HeadBottom));
    if !(top.present && bottom.present) {
        return Err(Error::Degenerate("head_top and head_bottom must both be present".into()));
    }
    Ok(top.distance(bottom).max(t.min_head_size))
}

/// Head size with fallbacks: 0.3 x box diagonal for headless poses, then
/// `min_head_size` when no box can be formed either.
pub fn reference_head_size(pose: &Pose, t: &PckhThreshold) -> f64 {
    head_size(pose, t).unwrap_or_else(|_| match pose_box(pose) {
        Ok(b) => (HEADLESS_DIAGONAL_FACTOR * b.diagonal()).max(t.min_head_size),
        Err(_) => t.min_head_size,
    })
}

/// Correctness of one predicted/ground-truth pose pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairScore {
    pub pred: usize,
    pub gt: usize,
    /// Distance of each within-radius joint, `None` otherwise.
    pub correct: [Option<f64>; Joint::COUNT],
    /// PCKh radius for this ground-truth pose.
    pub radius: f64,
}

impl PairScore {
    pub fn correct_count(&self) -> usize {
        self.correct.iter().flatten().count()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameMatch {
    pub pairs: Vec<PairScore>,
    pub unmatched_preds: Vec<usize>,
    pub unmatched_gts: Vec<usize>,
}

fn score_pair(pred: &Pose, gt: &Pose, radius: f64) -> [Option<f64>; Joint::COUNT] {
    std::array::from_fn(|i| {
        let j = Joint::ALL[i];
        let (p, g) = (pred.keypoint(j), gt.keypoint(j));
        if p.present && g.present {
            let d = p.distance(g);
            (d <= radius).then_some(d)
        } else {
            None
        }
    })
}

/// Matches predicted to ground-truth poses of one frame.
///
/// Costs are `1 - (correct joints / ground-truth present joints)`, solved
/// with the Hungarian method; pairs without any correct joint are dropped.
pub fn match_poses_frame(preds: &[Pose], gts: &[Pose], t: &PckhThreshold) -> FrameMatch {
    let radii: Vec<f64> = gts.iter().map(|g| t.factor * reference_head_size(g, t)).collect();
    let scores: Vec<Vec<[Option<f64>; Joint::COUNT]>> =
        preds.iter().map(|p| gts.iter().zip(&radii).map(|(g, &r)| score_pair(p, g, r)).collect()).collect();
    let fraction = |pi: usize, gi: usize| {
        let n_gt = gts[gi].present_count();
        if n_gt == 0 {
            0.0
        } else {
            scores[pi][gi].iter().flatten().count() as f64 / n_gt as f64
        }
    };
    let cost = CostMatrix::from_fn(preds.len(), gts.len(), |p, g| 1.0 - fraction(p, g)).expect("fractions are finite");

    let mut pred_used = vec![false; preds.len()];
    let mut gt_used = vec![false; gts.len()];
    let mut pairs = Vec::new();
    for (p, g) in solve_assignment(&cost, AssignmentMethod::Hungarian) {
        let correct = scores[p][g];
        if correct.iter().any(Option::is_some) {
            pred_used[p] = true;
            gt_used[g] = true;
            pairs.push(PairScore { pred: p, gt: g, correct, radius: radii[g] });
        }
    }
    FrameMatch {
        pairs,
        unmatched_preds: (0..preds.len()).filter(|&i| !pred_used[i]).collect(),
        unmatched_gts: (0..gts.len()).filter(|&i| !gt_used[i]).collect(),
    }
}
