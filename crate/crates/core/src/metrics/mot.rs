use std::collections::HashMap;

use serde::Serialize;

use super::align;
use super::pckh::{match_poses_frame, PckhThreshold};
use crate::error::{Error, Result};
use crate::model::{EvalGroup, GroupValues, Joint, PerJoint, Sequence, TrackId};

/// Raw CLEAR-MOT tallies at keypoint level.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct MotCounts {
    pub gt: usize,
    /// Ground-truth keypoints matched by a within-radius prediction (switches included).
    pub matches: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub idsw: usize,
    #[serde(skip)]
    pub precision_sum: f64,
}

impl MotCounts {
    fn add(&mut self, other: &MotCounts) {
        self.gt += other.gt;
        self.matches += other.matches;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self.idsw += other.idsw;
        self.precision_sum += other.precision_sum;
    }

    /// `100 (1 - (fn + fp + idsw) / gt)`; `None` without ground truth.
    pub fn mota(&self) -> Option<f64> {
        (self.gt > 0).then(|| 100.0 * (1.0 - (self.fn_ + self.fp + self.idsw) as f64 / self.gt as f64))
    }

    /// Mean of `1 - d / radius` over matches, as a percentage.
    pub fn motp(&self) -> Option<f64> {
        (self.matches > 0).then(|| 100.0 * self.precision_sum / self.matches as f64)
    }

    pub fn precision(&self) -> f64 {
        let den = self.matches + self.fp;
        if den == 0 {
            100.0
        } else {
            100.0 * self.matches as f64 / den as f64
        }
    }

    pub fn recall(&self) -> f64 {
        let den = self.matches + self.fn_;
        if den == 0 {
            100.0
        } else {
            100.0 * self.matches as f64 / den as f64
        }
    }
}

/// Multi-frame tracking scores.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MotReport {
    pub mota: GroupValues<Option<f64>>,
    #[serde(rename = "Total")]
    pub total_mota: Option<f64>,
    #[serde(rename = "MOTP")]
    pub motp: Option<f64>,
    #[serde(rename = "Prec")]
    pub precision: f64,
    #[serde(rename = "Rec")]
    pub recall: f64,
    pub counts: GroupValues<MotCounts>,
    pub total_counts: MotCounts,
    #[serde(skip)]
    pub joint_counts: PerJoint<MotCounts>,
}

fn require_ids(seq: &Sequence) -> Result<()> {
    for f in &seq.frames {
        if let Some(pose) = f.poses.iter().position(|p| p.track_id.is_none()) {
            return Err(Error::MissingTrackId { sequence: seq.name.clone(), frame: f.index, pose });
        }
    }
    Ok(())
}

/// Keypoint-level CLEAR-MOT evaluation.
///
/// Poses are matched per frame as in [`match_poses_frame`]. A within-radius
/// joint of a matched pair is a match; it is also an id switch when the
/// predicted track differs from the one last matched to the same
/// ground-truth track and joint. Other present predicted joints are false
/// positives and other present ground-truth joints are misses.
pub fn evaluate_mot(preds: &[Sequence], gts: &[Sequence], t: &PckhThreshold) -> Result<MotReport> {
    t.validate()?;
    let pairs = align(preds, gts)?;
    for (p, g) in &pairs {
        require_ids(p)?;
        require_ids(g)?;
    }

    let mut joint_counts = PerJoint::from_fn(|_| MotCounts::default());
    for (pseq, gseq) in pairs {
        let mut last_match: HashMap<(TrackId, Joint), TrackId> = HashMap::new();
        for (pf, gf) in pseq.frames.iter().zip(&gseq.frames) {
            for g in &gf.poses {
                for kp in g.present_keypoints() {
                    joint_counts[kp.joint].gt += 1;
                }
            }
            let m = match_poses_frame(&pf.poses, &gf.poses, t);
            for pair in &m.pairs {
                let (pred, gt) = (&pf.poses[pair.pred], &gf.poses[pair.gt]);
                let (pid, gid) = (pred.track_id.expect("checked"), gt.track_id.expect("checked"));
                for j in Joint::ALL {
                    let c = &mut joint_counts[j];
                    let (pk, gk) = (pred.keypoint(j), gt.keypoint(j));
                    match pair.correct[j.index()] {
                        Some(d) => {
                            c.matches += 1;
                            c.precision_sum += 1.0 - d / pair.radius;
                            if let Some(prev) = last_match.insert((gid, j), pid) {
                                if prev != pid {
                                    c.idsw += 1;
                                }
                            }
                        }
                        None => {
                            c.fp += usize::from(pk.present);
                            c.fn_ += usize::from(gk.present);
                        }
                    }
                }
            }
            for &pi in &m.unmatched_preds {
                for kp in pf.poses[pi].present_keypoints() {
                    joint_counts[kp.joint].fp += 1;
                }
            }
            for &gi in &m.unmatched_gts {
                for kp in gf.poses[gi].present_keypoints() {
                    joint_counts[kp.joint].fn_ += 1;
                }
            }
        }
    }

    let counts = GroupValues::from_fn(|g: EvalGroup| {
        let mut c = MotCounts::default();
        for &j in g.joints() {
            c.add(&joint_counts[j]);
        }
        c
    });
    let mut total = MotCounts::default();
    for c in &counts.0 {
        total.add(c);
    }
    Ok(MotReport {
        mota: counts.map(MotCounts::mota),
        total_mota: total.mota(),
        motp: total.motp(),
        precision: total.precision(),
        recall: total.recall(),
        counts,
        total_counts: total,
        joint_counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mota_formula() {
        let c = MotCounts { gt: 10, matches: 7, fp: 4, fn_: 3, idsw: 1, precision_sum: 3.5 };
        assert!((c.mota().unwrap() - 20.0).abs() < 1e-12);
        assert!((c.motp().unwrap() - 50.0).abs() < 1e-12);
        let flooded = MotCounts { fp: 30, ..c };
        assert!(flooded.mota().unwrap() < 0.0);
        assert_eq!(MotCounts::default().mota(), None);
    }
}
