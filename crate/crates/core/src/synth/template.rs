use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::Deserialize;

use crate::geometry::Point2;
use crate::model::{Joint, PerJoint};

const SKELETON_JSON: &str = include_str!("../../data/skeleton.json");

#[derive(Deserialize)]
struct SkeletonDoc {
    joints: BTreeMap<String, [f64; 2]>,
}

/// Canonical joint offsets at scale 1, centered on the template's bounding box.
#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton {
    offsets: PerJoint<Point2>,
}

impl Skeleton {
    /// The bundled stick figure.
    pub fn canonical() -> &'static Skeleton {
        static CELL: OnceLock<Skeleton> = OnceLock::new();
        CELL.get_or_init(|| {
            let doc: SkeletonDoc = serde_json::from_str(SKELETON_JSON).expect("bundled skeleton parses");
            assert_eq!(doc.joints.len(), Joint::COUNT, "bundled skeleton lists every joint once");
            let raw = PerJoint::from_fn(|j| {
                let [x, y] = doc.joints[j.name()];
                Point2::new(x, y)
            });
            let (mut x1, mut y1, mut x2, mut y2) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
            for p in &raw.0 {
                x1 = x1.min(p.x);
                y1 = y1.min(p.y);
                x2 = x2.max(p.x);
                y2 = y2.max(p.y);
            }
            let (cx, cy) = ((x1 + x2) / 2.0, (y1 + y2) / 2.0);
            Skeleton { offsets: PerJoint::from_fn(|j| Point2::new(raw[j].x - cx, raw[j].y - cy)) }
        })
    }

    pub fn offset(&self, joint: Joint) -> Point2 {
        self.offsets[joint]
    }

    /// Half extents `(w/2, h/2)` of the figure at `scale`.
    pub fn half_extent(&self, scale: f64) -> (f64, f64) {
        let hx = self.offsets.0.iter().map(|p| p.x.abs()).fold(0.0, f64::max);
        let hy = self.offsets.0.iter().map(|p| p.y.abs()).fold(0.0, f64::max);
        (hx * scale, hy * scale)
    }

    /// Distance from head_top to head_bottom at `scale`.
    pub fn head_size(&self, scale: f64) -> f64 {
        self.offset(Joint::HeadTop).distance(&self.offset(Joint::HeadBottom)) * scale
    }

    /// Joint position for a figure centered at `center`.
    pub fn place(&self, joint: Joint, center: Point2, scale: f64) -> Point2 {
        let o = self.offset(joint);
        Point2::new(center.x + o.x * scale, center.y + o.y * scale)
    }
}
