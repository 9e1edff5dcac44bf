use std::cmp::Ordering;

use serde::Serialize;

use super::pckh::{match_poses_frame, PckhThreshold};
use super::{align, mean_defined};
use crate::error::Result;
use crate::model::{EvalGroup, GroupValues, Joint, PerJoint, Sequence};

/// Per-joint scoring detail.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct JointAp {
    /// Percentage; `None` when the joint has no ground truth.
    pub ap: Option<f64>,
    pub tp: usize,
    pub fp: usize,
    pub n_gt: usize,
}

/// Single-frame pose estimation scores.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApReport {
    pub groups: GroupValues<Option<f64>>,
    /// Mean of the per-joint APs (not of the groups).
    #[serde(rename = "Total")]
    pub total: Option<f64>,
    pub joints: PerJoint<JointAp>,
}

/// Area under the interpolated precision envelope, as a fraction.
///
/// `ranked` holds `(confidence, is_true_positive)` for every prediction;
/// `n_gt` is the number of positives available.
pub fn average_precision(ranked: &[(f64, bool)], n_gt: usize) -> f64 {
    if n_gt == 0 {
        return 0.0;
    }
    let mut order: Vec<usize> = (0..ranked.len()).collect();
    order.sort_by(|&a, &b| ranked[b].0.partial_cmp(&ranked[a].0).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
    let mut recall = Vec::with_capacity(order.len());
    let mut precision = Vec::with_capacity(order.len());
    let (mut tp, mut fp) = (0usize, 0usize);
    for i in order {
        if ranked[i].1 {
            tp += 1;
        } else {
            fp += 1;
        }
        recall.push(tp as f64 / n_gt as f64);
        precision.push(tp as f64 / (tp + fp) as f64);
    }
    for i in (0..precision.len().saturating_sub(1)).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (r, p) in recall.iter().zip(&precision) {
        ap += (r - prev_recall) * p;
        prev_recall = *r;
    }
    ap
}

/// Per-joint AP over all frames of all aligned sequences.
///
/// Within each frame, predicted and ground-truth poses are matched; a
/// predicted joint is a true positive when its pose is matched and it lies
/// within the PCKh radius, otherwise a false positive. Predictions are ranked
/// by keypoint confidence.
pub fn evaluate_ap(preds: &[Sequence], gts: &[Sequence], t: &PckhThreshold) -> Result<ApReport> {
    t.validate()?;
    let mut ranked: Vec<Vec<(f64, bool)>> = vec![Vec::new(); Joint::COUNT];
    let mut n_gt = [0usize; Joint::COUNT];

    for (pseq, gseq) in align(preds, gts)? {
        for (pf, gf) in pseq.frames.iter().zip(&gseq.frames) {
            for g in &gf.poses {
                for kp in g.present_keypoints() {
                    n_gt[kp.joint.index()] += 1;
                }
            }
            let m = match_poses_frame(&pf.poses, &gf.poses, t);
            let mut hit = vec![[false; Joint::COUNT]; pf.poses.len()];
            for pair in &m.pairs {
                for (i, c) in pair.correct.iter().enumerate() {
                    hit[pair.pred][i] = c.is_some();
                }
            }
            for (pi, pose) in pf.poses.iter().enumerate() {
                for kp in pose.present_keypoints() {
                    let j = kp.joint.index();
                    ranked[j].push((kp.confidence, hit[pi][j]));
                }
            }
        }
    }

    let joints = PerJoint::from_fn(|j| {
        let r = &ranked[j.index()];
        let tp = r.iter().filter(|(_, hit)| *hit).count();
        let n = n_gt[j.index()];
        JointAp { ap: (n > 0).then(|| 100.0 * average_precision(r, n)), tp, fp: r.len() - tp, n_gt: n }
    });
    let groups = GroupValues::from_fn(|g: EvalGroup| mean_defined(g.joints().iter().map(|&j| joints[j].ap)));
    let total = mean_defined(joints.0.iter().map(|j| j.ap));
    Ok(ApReport { groups, total, joints })
}
