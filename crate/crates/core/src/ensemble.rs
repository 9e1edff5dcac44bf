//! Two-model fusion for the same person candidate.
//!
//! Both models are assumed to have been run on the same candidate box, so
//! their `det_score` and `bbox` normally agree; the fused pose averages them
//! either way.

use serde::{Deserialize, Serialize};

use crate::geometry::BBox;
use crate::model::{EvalGroup, GroupValues, Joint, Keypoint, PerJoint, Pose};

/// Which model a joint is taken from in expert mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Source {
    A,
    B,
    #[serde(rename = "AVG")]
    Avg,
}

/// Per-joint routing table for [`fuse_expert`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ExpertMap(pub PerJoint<Source>);

impl Default for ExpertMap {
    /// Shoulders and hips from model A, elbows/wrists/knees/ankles from model
    /// B, head joints averaged. Elbows and knees count with the end limbs
    /// here; that split is a choice, so the map is configurable.
    fn default() -> Self {
        ExpertMap(PerJoint::from_fn(|j| match j.group() {
            EvalGroup::Shou | EvalGroup::Hip => Source::A,
            EvalGroup::Elb | EvalGroup::Wri | EvalGroup::Knee | EvalGroup::Ankl => Source::B,
            EvalGroup::Head => Source::Avg,
        }))
    }
}

impl ExpertMap {
    pub fn uniform(source: Source) -> Self {
        ExpertMap(PerJoint::uniform(source))
    }

    pub fn source(&self, joint: Joint) -> Source {
        self.0[joint]
    }

    /// The routing shared by every joint of `group`, if they agree.
    pub fn group_source(&self, group: EvalGroup) -> Option<Source> {
        let first = self.source(group.joints()[0]);
        group.joints().iter().all(|&j| self.source(j) == first).then_some(first)
    }

    /// Applies the routing to per-group values (e.g. two rows of a per-joint
    /// score table). `None` when some group mixes sources.
    pub fn select_groups(&self, a: &GroupValues<f64>, b: &GroupValues<f64>) -> Option<GroupValues<f64>> {
        let mut out = GroupValues::default();
        for g in EvalGroup::ALL {
            out[g] = match self.group_source(g)? {
                Source::A => a[g],
                Source::B => b[g],
                Source::Avg => 0.5 * (a[g] + b[g]),
            };
        }
        Some(out)
    }
}

/// Ensemble strategy for the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum EnsembleMode {
    #[default]
    None,
    Average,
    Expert {
        #[serde(default)]
        expert_map: ExpertMap,
    },
}

impl EnsembleMode {
    pub fn fuse(&self, a: &Pose, b: &Pose) -> Pose {
        match self {
            EnsembleMode::None => a.clone(),
            EnsembleMode::Average => fuse_average(a, b),
            EnsembleMode::Expert { expert_map } => fuse_expert(a, b, expert_map),
        }
    }
}

fn mean(a: f64, b: f64) -> f64 {
    0.5 * (a + b)
}

fn average_keypoint(a: &Keypoint, b: &Keypoint) -> Keypoint {
    match (a.present, b.present) {
        (true, false) => *a,
        (false, true) => *b,
        (both, _) => Keypoint {
            joint: a.joint,
            x: mean(a.x, b.x),
            y: mean(a.y, b.y),
            confidence: mean(a.confidence, b.confidence),
            present: both,
        },
    }
}

fn average_box(a: Option<BBox>, b: Option<BBox>, score: f64) -> Option<BBox> {
    match (a, b) {
        (Some(a), Some(b)) => {
            Some(BBox { x1: mean(a.x1, b.x1), y1: mean(a.y1, b.y1), x2: mean(a.x2, b.x2), y2: mean(a.y2, b.y2), score })
        }
        (one, other) => one.or(other).map(|bx| BBox { score, ..bx }),
    }
}

fn fuse_with(a: &Pose, b: &Pose, mut pick: impl FnMut(Joint, &Keypoint, &Keypoint) -> Keypoint) -> Pose {
    let det_score = mean(a.det_score, b.det_score);
    let mut out = Pose::from_fn(det_score, |j| pick(j, a.keypoint(j), b.keypoint(j)));
    out.bbox = average_box(a.bbox, b.bbox, det_score);
    out.track_id = if a.track_id == b.track_id { a.track_id } else { None };
    out
}

/// Average mode: per joint, the mean of both predictions when both are
/// present, the present one otherwise.
pub fn fuse_average(a: &Pose, b: &Pose) -> Pose {
    fuse_with(a, b, |_, ka, kb| average_keypoint(ka, kb))
}

/// Expert mode: each joint is copied verbatim from the model named by `map`
/// (averaged for [`Source::Avg`]).
pub fn fuse_expert(a: &Pose, b: &Pose, map: &ExpertMap) -> Pose {
    fuse_with(a, b, |j, ka, kb| match map.source(j) {
        Source::A => *ka,
        Source::B => *kb,
        Source::Avg => average_keypoint(ka, kb),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pose_with(x: f64, y: f64, c: f64) -> Pose {
        Pose::from_fn(0.8, |j| Keypoint::new(j, x + j.index() as f64, y, c))
    }

    #[test]
    fn average_is_idempotent() {
        let mut p = pose_with(10.0, 20.0, 0.8);
        p.keypoint_mut(Joint::LeftAnkle).present = false;
        p.bbox = Some(BBox::new(0.0, 0.0, 5.0, 5.0, 0.8).unwrap());
        assert_eq!(fuse_average(&p, &p), p);
    }

    #[test]
    fn average_arithmetic() {
        let a = pose_with(10.0, 20.0, 0.8);
        let b = pose_with(20.0, 40.0, 0.6);
        let f = fuse_average(&a, &b);
        let kp = f.keypoint(Joint::Nose);
        assert_eq!((kp.x, kp.y), (15.0, 30.0));
        assert!((kp.confidence - 0.7).abs() < 1e-12);
    }

    #[test]
    fn average_copies_single_present_side() {
        let a = pose_with(10.0, 20.0, 0.8);
        let mut b = pose_with(20.0, 40.0, 0.6);
        b.keypoint_mut(Joint::Nose).present = false;
        let f = fuse_average(&a, &b);
        assert_eq!(*f.keypoint(Joint::Nose), *a.keypoint(Joint::Nose));
        let g = fuse_average(&b, &a);
        assert_eq!(*g.keypoint(Joint::Nose), *a.keypoint(Joint::Nose));
    }

    #[test]
    fn expert_all_a_is_identity() {
        let a = pose_with(10.0, 20.0, 0.8);
        let b = pose_with(30.0, 50.0, 0.2);
        assert_eq!(fuse_expert(&a, &b, &ExpertMap::uniform(Source::A)), a);
    }

    #[test]
    fn expert_default_routes_by_group() {
        let a = pose_with(0.0, 0.0, 0.9);
        let b = pose_with(100.0, 100.0, 0.5);
        let f = fuse_expert(&a, &b, &ExpertMap::default());
        for j in Joint::ALL {
            let got = f.keypoint(j);
            let want = match j.group() {
                EvalGroup::Shou | EvalGroup::Hip => *a.keypoint(j),
                EvalGroup::Head => average_keypoint(a.keypoint(j), b.keypoint(j)),
                _ => *b.keypoint(j),
            };
            assert_eq!(*got, want, "{j}");
        }
    }

    #[test]
    fn expert_map_config_shape() {
        let text = serde_json::to_string(&ExpertMap::default()).unwrap();
        assert!(text.contains(r#""left_shoulder":"A""#));
        assert!(text.contains(r#""nose":"AVG""#));
        let back: ExpertMap = serde_json::from_str(&text).unwrap();
        assert_eq!(back, ExpertMap::default());

        let mode: EnsembleMode = serde_json::from_str(r#"{"mode": "expert"}"#).unwrap();
        assert_eq!(mode, EnsembleMode::Expert { expert_map: ExpertMap::default() });
    }
}
