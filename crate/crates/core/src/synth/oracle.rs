use serde::Serialize;

use super::{Provenance, SynthOutput};
use crate::metrics::{reference_head_size, PckhThreshold};
use crate::model::Joint;

/// Keypoint-level outcome counts derived from generator provenance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct AnalyticCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

/// [`analytic_counts_with`] under the default PCKh threshold.
pub fn analytic_counts(out: &SynthOutput, drop_threshold: f64) -> AnalyticCounts {
    analytic_counts_with(out, drop_threshold, &PckhThreshold::default())
}

/// Counts keypoint outcomes from provenance alone, without any matching.
///
/// A kept keypoint of a person's detection is a true positive within the
/// PCKh radius of its own ground truth, else one false positive and one
/// miss. Dropped keypoints and undetected persons are misses; kept keypoints
/// of false poses are false positives.
pub fn analytic_counts_with(out: &SynthOutput, drop_threshold: f64, t: &PckhThreshold) -> AnalyticCounts {
    let mut c = AnalyticCounts::default();
    for ((gf, df), sources) in out.gt.frames.iter().zip(&out.det.frames).zip(&out.provenance) {
        let mut detected = vec![false; gf.poses.len()];
        for (pose, source) in df.poses.iter().zip(sources) {
            match *source {
                Provenance::Person(i) => {
                    detected[i] = true;
                    let truth = &gf.poses[i];
                    let radius = t.factor * reference_head_size(truth, t);
                    for j in Joint::ALL {
                        let (k, g) = (pose.keypoint(j), truth.keypoint(j));
                        if !g.present {
                            c.fp += usize::from(k.present && k.confidence >= drop_threshold);
                            continue;
                        }
                        if k.present && k.confidence >= drop_threshold {
                            if k.distance(g) <= radius {
                                c.tp += 1;
                            } else {
                                c.fp += 1;
                                c.fn_ += 1;
                            }
                        } else {
                            c.fn_ += 1;
                        }
                    }
                }
                Provenance::FalsePositive => {
                    c.fp += pose.present_keypoints().filter(|k| k.confidence >= drop_threshold).count();
                }
            }
        }
        for (i, truth) in gf.poses.iter().enumerate() {
            if !detected[i] {
                c.fn_ += truth.present_count();
            }
        }
    }
    c
}
