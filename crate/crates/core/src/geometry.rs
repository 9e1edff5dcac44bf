//! Box arithmetic for the detection stage: ground-truth box inference,
//! overlap, candidate pruning, non-maximum suppression and detection
//! precision/recall.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Pose;

/// Growth applied to keypoint extents when inferring person boxes.
pub const DEFAULT_ENLARGE: f64 = 0.20;

/// IoU a detection needs against a ground-truth box to count as correct.
pub const DETECTION_IOU_THRESHOLD: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Axis-aligned box in pixels with a detection score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
    pub score: f64,
}

impl BBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64, score: f64) -> Result<Self> {
        if ![x1, y1, x2, y2, score].iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("box coordinates must be finite"));
        }
        if x1 > x2 || y1 > y2 {
            return Err(Error::invalid(format!("box corners out of order: [{x1}, {y1}, {x2}, {y2}]")));
        }
        Ok(BBox { x1, y1, x2, y2, score })
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> Point2 {
        Point2::new(0.5 * (self.x1 + self.x2), 0.5 * (self.y1 + self.y2))
    }

    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.x1 <= x && x <= self.x2 && self.y1 <= y && y <= self.y2
    }

    pub fn translated(&self, dx: f64, dy: f64) -> BBox {
        BBox { x1: self.x1 + dx, y1: self.y1 + dy, x2: self.x2 + dx, y2: self.y2 + dy, score: self.score }
    }
}

/// Tight box over the present keypoints, grown by `enlarge` of its width and
/// height about the center (0.2 gives 1.2x the extent on each axis). The
/// result carries the pose's detection score. It is not clipped to the image.
pub fn bbox_from_keypoints(pose: &Pose, enlarge: f64) -> Result<BBox> {
    if !enlarge.is_finite() || enlarge < 0.0 {
        return Err(Error::invalid(format!("enlarge ratio {enlarge} must be >= 0")));
    }
    let mut n = 0usize;
    let (mut x1, mut y1) = (f64::INFINITY, f64::INFINITY);
    let (mut x2, mut y2) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for kp in pose.present_keypoints() {
        n += 1;
        x1 = x1.min(kp.x);
        y1 = y1.min(kp.y);
        x2 = x2.max(kp.x);
        y2 = y2.max(kp.y);
    }
    if n < 2 {
        return Err(Error::Degenerate(format!("need at least 2 present keypoints to infer a box, found {n}")));
    }
    let (w, h) = (x2 - x1, y2 - y1);
    if w <= 0.0 || h <= 0.0 {
        return Err(Error::Degenerate(format!("keypoint extent {w}x{h} has zero area")));
    }
    let (dx, dy) = (0.5 * enlarge * w, 0.5 * enlarge * h);
    BBox::new(x1 - dx, y1 - dy, x2 + dx, y2 + dy, pose.det_score)
}

/// The pose's stored box, or one inferred from its keypoints.
pub fn pose_box(pose: &Pose) -> Result<BBox> {
    match pose.bbox {
        Some(b) => Ok(b),
        None => bbox_from_keypoints(pose, DEFAULT_ENLARGE),
    }
}

/// Intersection over union; 0 when the union is empty.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let iw = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(0.0);
    let ih = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

/// Keeps candidates with `det_score >= threshold`, in input order.
pub fn prune_candidates(poses: &[Pose], threshold: f64) -> Vec<Pose> {
    poses.iter().filter(|p| p.det_score >= threshold).cloned().collect()
}

/// Indices sorted by descending score, ties by input position.
pub(crate) fn score_order(scores: impl Iterator<Item = f64>) -> Vec<usize> {
    let scores: Vec<f64> = scores.collect();
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[j].partial_cmp(&scores[i]).unwrap_or(Ordering::Equal).then(i.cmp(&j)));
    order
}

/// Greedy NMS returning kept input indices in score order.
pub fn nms_indices(poses: &[Pose], iou_threshold: f64) -> Result<Vec<usize>> {
    let boxes = poses
        .iter()
        .enumerate()
        .map(|(i, p)| p.bbox.ok_or_else(|| Error::invalid(format!("candidate {i} has no bounding box"))))
        .collect::<Result<Vec<_>>>()?;
    let mut kept: Vec<usize> = Vec::new();
    for i in score_order(poses.iter().map(|p| p.det_score)) {
        if kept.iter().all(|&k| iou(&boxes[i], &boxes[k]) <= iou_threshold) {
            kept.push(i);
        }
    }
    Ok(kept)
}

/// Greedy non-maximum suppression over candidate boxes.
///
/// Candidates are visited by descending `det_score` (ties by input order); a
/// candidate survives when its IoU with every survivor so far is at most
/// `iou_threshold`. Survivors are returned in visiting order.
pub fn nms_boxes(poses: &[Pose], iou_threshold: f64) -> Result<Vec<Pose>> {
    Ok(nms_indices(poses, iou_threshold)?.into_iter().map(|i| poses[i].clone()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrResult {
    pub precision: f64,
    pub recall: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl PrResult {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 1.0 } else { num as f64 / den as f64 };
        PrResult { precision: ratio(tp, tp + fp), recall: ratio(tp, tp + fn_), tp, fp, fn_ }
    }

    /// Sums counts of several results and recomputes the ratios.
    pub fn combine(parts: impl IntoIterator<Item = PrResult>) -> Self {
        let (tp, fp, fn_) = parts.into_iter().fold((0, 0, 0), |(a, b, c), r| (a + r.tp, b + r.fp, c + r.fn_));
        PrResult::from_counts(tp, fp, fn_)
    }
}

/// Scores detections against ground truth.
///
/// Detections are taken by descending score; each claims the unmatched
/// ground-truth box it overlaps most (lowest index on ties) when that IoU is
/// at least `iou_threshold`, otherwise it is a false positive.
pub fn detection_pr(dets: &[BBox], gts: &[BBox], iou_threshold: f64) -> PrResult {
    let mut taken = vec![false; gts.len()];
    let mut tp = 0;
    for i in score_order(dets.iter().map(|d| d.score)) {
        let best = gts.iter().enumerate().filter(|(g, _)| !taken[*g]).map(|(g, gt)| (g, iou(&dets[i], gt))).fold(
            None,
            |best: Option<(usize, f64)>, (g, v)| match best {
                Some((_, bv)) if bv >= v => best,
                _ => Some((g, v)),
            },
        );
        if let Some((g, v)) = best {
            if v >= iou_threshold {
                taken[g] = true;
                tp += 1;
            }
        }
    }
    PrResult::from_counts(tp, dets.len() - tp, gts.len() - tp)
}
