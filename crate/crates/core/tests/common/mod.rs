#![allow(dead_code)]

use proptest::prelude::*;
use topdown_core::geometry::{bbox_from_keypoints, BBox, DEFAULT_ENLARGE};
use topdown_core::{Joint, Keypoint, Pose};

/// Proptest settings without failure files (the suites live outside `src`).
pub fn cases(n: u32) -> ProptestConfig {
    ProptestConfig { cases: n, failure_persistence: None, ..ProptestConfig::default() }
}

pub fn coord() -> impl Strategy<Value = f64> {
    (-500i32..1500).prop_map(|v| f64::from(v) / 4.0)
}

pub fn confidence() -> impl Strategy<Value = f64> {
    (0u32..=1000).prop_map(|v| f64::from(v) / 1000.0)
}

pub fn keypoints() -> impl Strategy<Value = Vec<(f64, f64, f64, bool)>> {
    prop::collection::vec((coord(), coord(), confidence(), prop::bool::weighted(0.8)), Joint::COUNT)
}

pub fn pose_from(det_score: f64, kps: &[(f64, f64, f64, bool)]) -> Pose {
    Pose::from_fn(det_score, |j| {
        let (x, y, c, present) = kps[j.index()];
        Keypoint { present, ..Keypoint::new(j, x, y, c) }
    })
}

/// Any pose, possibly with no present keypoints.
pub fn pose() -> impl Strategy<Value = Pose> {
    (confidence(), keypoints()).prop_map(|(s, k)| pose_from(s, &k))
}

pub fn bbox() -> impl Strategy<Value = BBox> {
    (coord(), coord(), 1u32..400, 1u32..400, confidence())
        .prop_map(|(x, y, w, h, s)| BBox::new(x, y, x + f64::from(w), y + f64::from(h), s).unwrap())
}

/// A pose whose box can be inferred, with that box attached.
pub fn boxed_pose() -> impl Strategy<Value = Pose> {
    pose().prop_filter_map("box must be inferable", |mut p| {
        let b = bbox_from_keypoints(&p, DEFAULT_ENLARGE).ok()?;
        p.bbox = Some(b);
        Some(p)
    })
}

/// Every joint present, inside a `size` square at `(x, y)`.
pub fn full_pose_at(x: f64, y: f64, size: f64, conf: f64) -> Pose {
    Pose::from_fn(conf, |j| {
        let i = j.index() as f64;
        Keypoint::new(j, x + size * (i % 4.0) / 3.0, y + size * (i / 14.0), conf)
    })
}
