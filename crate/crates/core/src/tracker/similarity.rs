use crate::error::{Error, Result};
use crate::geometry::{iou, pose_box};
use crate::model::{Joint, PerJoint, Pose};

use super::TrackerConfig;

/// Scores how likely two poses in consecutive observations are the same person.
/// Implementations must return values in `[0, 1]`.
pub trait PoseSimilarity {
    fn similarity(&self, track: &Pose, candidate: &Pose) -> Result<f64>;
}

/// Weighted blend of box IoU and a Gaussian keypoint-distance kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxKeypointSimilarity {
    pub w_iou: f64,
    pub w_pose: f64,
    pub kappa: PerJoint<f64>,
}

impl BoxKeypointSimilarity {
    pub fn from_config(config: &TrackerConfig) -> Self {
        BoxKeypointSimilarity { w_iou: config.w_iou, w_pose: config.w_pose, kappa: config.kappa }
    }

    /// Mean over joints present in both poses of `exp(-d^2 / (2 (s k_j)^2))`,
    /// with `s` the square root of `scale_area`. Zero when no joint is shared.
    fn keypoint_kernel(&self, a: &Pose, b: &Pose, scale_area: f64) -> f64 {
        let s = scale_area.max(0.0).sqrt();
        let (mut sum, mut n) = (0.0, 0usize);
        for j in Joint::ALL {
            let (ka, kb) = (a.keypoint(j), b.keypoint(j));
            if !(ka.present && kb.present) {
                continue;
            }
            let d2 = (ka.x - kb.x).powi(2) + (ka.y - kb.y).powi(2);
            let sigma = s * self.kappa[j];
            sum += if sigma > 0.0 {
                (-d2 / (2.0 * sigma * sigma)).exp()
            } else if d2 == 0.0 {
                1.0
            } else {
                0.0
            };
            n += 1;
        }
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }
}

impl PoseSimilarity for BoxKeypointSimilarity {
    fn similarity(&self, a: &Pose, b: &Pose) -> Result<f64> {
        let box_a = pose_box(a).map_err(|e| Error::Degenerate(format!("track pose: {e}")))?;
        let box_b = pose_box(b).map_err(|e| Error::Degenerate(format!("candidate pose: {e}")))?;
        let kp = self.keypoint_kernel(a, b, box_a.area());
        let score = (self.w_iou * iou(&box_a, &box_b) + self.w_pose * kp) / (self.w_iou + self.w_pose);
        Ok(score.clamp(0.0, 1.0))
    }
}

/// Similarity used by the default tracker.
pub fn pose_similarity(a: &Pose, b: &Pose, config: &TrackerConfig) -> Result<f64> {
    BoxKeypointSimilarity::from_config(config).similarity(a, b)
}
