mod common;

use common::*;
use proptest::prelude::*;
use topdown_core::metrics::*;
use topdown_core::pipeline::{run_pipeline, PipelineConfig, PipelineInput};
use topdown_core::synth::{analytic_counts, generate, SynthSpec};
use topdown_core::{EvalGroup, Frame, Joint, Keypoint, Pose, Sequence, TrackId};

fn with_id(mut p: Pose, id: u64) -> Pose {
    p.track_id = Some(TrackId(id));
    p
}

/// Two people 300 px apart over `n` frames, walking right.
fn two_people(n: u64) -> Sequence {
    let frames = (0..n)
        .map(|t| {
            let x = 2.0 * t as f64;
            Frame::new(t, 800, 600).with_poses(vec![
                with_id(full_pose_at(x, 50.0, 80.0, 1.0), 0),
                with_id(full_pose_at(x + 300.0, 50.0, 80.0, 1.0), 1),
            ])
        })
        .collect();
    Sequence::new("pair", frames).unwrap()
}

fn relabel(seq: &Sequence, f: impl Fn(u64, u64) -> u64) -> Sequence {
    let frames = seq
        .frames
        .iter()
        .map(|fr| {
            let poses = fr.poses.iter().map(|p| with_id(p.clone(), f(fr.index, p.track_id.unwrap().0))).collect();
            fr.with_poses(poses)
        })
        .collect();
    Sequence::new(seq.name.clone(), frames).unwrap()
}

fn check_decomposition(c: &MotCounts, mota: Option<f64>) {
    match mota {
        Some(m) => {
            let want = 100.0 * (1.0 - (c.fn_ + c.fp + c.idsw) as f64 / c.gt as f64);
            assert!((m - want).abs() <= 1e-9, "{m} vs {want}");
        }
        None => assert_eq!(c.gt, 0),
    }
}

#[test]
fn ground_truth_scores_perfectly() {
    let gt = vec![two_people(10)];
    let t = PckhThreshold::default();
    let ap = evaluate_ap(&gt, &gt, &t).unwrap();
    assert!(ap.groups.0.iter().all(|v| *v == Some(100.0)));
    assert_eq!(ap.total, Some(100.0));
    let mot = evaluate_mot(&gt, &gt, &t).unwrap();
    assert!(mot.mota.0.iter().all(|v| *v == Some(100.0)));
    assert_eq!((mot.total_mota, mot.motp), (Some(100.0), Some(100.0)));
    assert_eq!((mot.total_counts.fp, mot.total_counts.fn_, mot.total_counts.idsw), (0, 0, 0));
}

#[test]
fn empty_predictions_score_zero() {
    let gt = two_people(4);
    let empty = Sequence::new("pair", gt.frames.iter().map(|f| f.with_poses(vec![])).collect()).unwrap();
    let t = PckhThreshold::default();
    let ap = evaluate_ap(std::slice::from_ref(&empty), std::slice::from_ref(&gt), &t).unwrap();
    assert!(ap.groups.0.iter().all(|v| *v == Some(0.0)));
    let mot = evaluate_mot(&[empty], &[gt], &t).unwrap();
    assert_eq!(mot.total_mota, Some(0.0));
    assert_eq!(mot.recall, 0.0);
    assert_eq!(mot.total_counts.fn_, mot.total_counts.gt);
}

#[test]
fn one_swap_counts_both_tracks() {
    let gt = two_people(8);
    let swapped = relabel(&gt, |frame, id| if frame >= 5 { 1 - id } else { id });
    let mot = evaluate_mot(&[swapped], &[gt], &PckhThreshold::default()).unwrap();
    assert_eq!(mot.total_counts.idsw, 2 * Joint::COUNT);
    assert_eq!((mot.total_counts.fp, mot.total_counts.fn_), (0, 0));
    check_decomposition(&mot.total_counts, mot.total_mota);
    // A fresh id on one track from the same frame counts once per joint.
    let renamed = relabel(&two_people(8), |frame, id| if frame >= 5 && id == 0 { 7 } else { id });
    let mot = evaluate_mot(&[renamed], &[two_people(8)], &PckhThreshold::default()).unwrap();
    assert_eq!(mot.total_counts.idsw, Joint::COUNT);
}

#[test]
fn flooded_predictions_go_negative() {
    let gt = two_people(3);
    let flooded = Sequence::new(
        "pair",
        gt.frames
            .iter()
            .map(|f| {
                let mut poses = f.poses.clone();
                for k in 0..5 {
                    poses.push(with_id(full_pose_at(50.0 + 100.0 * k as f64, 400.0, 60.0, 0.9), 10 + k));
                }
                f.with_poses(poses)
            })
            .collect(),
    )
    .unwrap();
    let mot = evaluate_mot(&[flooded], &[gt], &PckhThreshold::default()).unwrap();
    assert!(mot.total_mota.unwrap() < 0.0);
    check_decomposition(&mot.total_counts, mot.total_mota);
}

#[test]
fn missing_ids_and_misalignment_are_errors() {
    let gt = two_people(2);
    let t = PckhThreshold::default();
    assert!(matches!(
        evaluate_mot(&[gt.without_track_ids()], std::slice::from_ref(&gt), &t),
        Err(topdown_core::Error::MissingTrackId { frame: 0, pose: 0, .. })
    ));
    let other = Sequence::new("other", gt.frames.clone()).unwrap();
    assert!(matches!(evaluate_ap(&[other], &[gt], &t), Err(topdown_core::Error::Misaligned(_))));
}

fn calibrated_pair(seed: u64) -> (Sequence, Sequence) {
    let out = generate(&SynthSpec { n_frames: 40, seed, ..SynthSpec::posetrack_calibrated() }).unwrap();
    (out.det, out.gt)
}

proptest! {
    #![proptest_config(cases(30))]

    #[test]
    fn adding_a_confident_correct_prediction_never_lowers_ap(seed in any::<u64>(), frame in 0usize..40) {
        let (det, gt) = calibrated_pair(seed);
        let t = PckhThreshold::default();
        let before = evaluate_ap(std::slice::from_ref(&det), std::slice::from_ref(&gt), &t).unwrap();
        // Give the frame one extra ground-truth person and its exact prediction at confidence 1.
        let extra = full_pose_at(5.0, 5.0, 30.0, 1.0);
        let mut gt2 = gt.clone();
        let mut det2 = det.clone();
        gt2.frames[frame].poses.push(with_id(extra.clone(), 99));
        det2.frames[frame].poses.push(extra);
        let after = evaluate_ap(&[det2], &[gt2], &t).unwrap();
        for j in Joint::ALL {
            prop_assert!(after.joints[j].ap.unwrap() >= before.joints[j].ap.unwrap() - 1e-9);
        }
    }

    #[test]
    fn removing_one_joint_zeroes_only_that_joint(seed in any::<u64>(), ji in 0usize..15) {
        let (det, gt) = calibrated_pair(seed);
        let joint = Joint::ALL[ji];
        let t = PckhThreshold::default();
        let before = evaluate_ap(std::slice::from_ref(&det), std::slice::from_ref(&gt), &t).unwrap();
        let stripped = det.map_poses(|p| {
            let mut q = p.clone();
            q.keypoint_mut(joint).present = false;
            q
        });
        let after = evaluate_ap(&[stripped], &[gt], &t).unwrap();
        for j in Joint::ALL {
            if j == joint {
                prop_assert_eq!(after.joints[j].ap, Some(0.0));
            } else {
                prop_assert_eq!(after.joints[j], before.joints[j]);
            }
        }
    }

    #[test]
    fn mota_recomputes_and_provenance_counts_agree(
        seed in any::<u64>(),
        n_persons in 1usize..7,
        p_miss in 0.0f64..0.5,
        fp_rate in 0.0f64..2.0,
        thr in 0.0f64..1.0,
        jitter_frac in 0.0f64..0.1,
    ) {
        let base = SynthSpec::posetrack_calibrated();
        let radius = 0.5 * base.head_size();
        let spec = SynthSpec {
            n_persons,
            n_frames: 30,
            p_miss,
            fp_rate,
            jitter_std: jitter_frac * radius,
            seed,
            ..base
        };
        let out = generate(&spec).unwrap();
        let cfg = PipelineConfig {
            candidate_threshold: 0.0,
            tracker: topdown_core::tracker::TrackerConfig { keypoint_drop_threshold: thr, ..Default::default() },
            ..PipelineConfig::default()
        };
        let input = PipelineInput { predictions: vec![out.det.clone()], predictions_b: None, ground_truth: vec![out.gt.clone()] };
        let report = run_pipeline(&cfg, &input).unwrap().report;
        let mot = &report.mot;
        for g in EvalGroup::ALL {
            check_decomposition(&mot.counts[g], mot.mota[g]);
        }
        check_decomposition(&mot.total_counts, mot.total_mota);
        let want = analytic_counts(&out, thr);
        let c = mot.total_counts;
        prop_assert_eq!((c.matches, c.fp, c.fn_), (want.tp, want.fp, want.fn_));
    }
}

/// Maximum total correct joints over all one-to-one pose pairings.
fn best_total(preds: &[Pose], gts: &[Pose], t: &PckhThreshold) -> usize {
    fn rec(i: usize, preds: &[Pose], gts: &[Pose], used: &mut Vec<bool>, t: &PckhThreshold) -> usize {
        if i == preds.len() {
            return 0;
        }
        let mut best = rec(i + 1, preds, gts, used, t);
        for g in 0..gts.len() {
            if !used[g] {
                let r = t.factor * reference_head_size(&gts[g], t);
                let n = Joint::ALL
                    .iter()
                    .filter(|&&j| {
                        let (p, q) = (preds[i].keypoint(j), gts[g].keypoint(j));
                        p.present && q.present && p.distance(q) <= r
                    })
                    .count();
                used[g] = true;
                best = best.max(n + rec(i + 1, preds, gts, used, t));
                used[g] = false;
            }
        }
        best
    }
    rec(0, preds, gts, &mut vec![false; gts.len()], t)
}

fn clustered_pose() -> impl Strategy<Value = Pose> {
    prop::collection::vec((0u32..80, 0u32..80, any::<bool>()), Joint::COUNT).prop_map(|v| {
        Pose::from_fn(0.9, |j| {
            let (x, y, present) = v[j.index()];
            Keypoint { present, ..Keypoint::new(j, f64::from(x), f64::from(y), 0.8) }
        })
    })
}

fn full_gt() -> impl Strategy<Value = Pose> {
    prop::collection::vec((0u32..80, 0u32..80), Joint::COUNT).prop_map(|v| {
        Pose::from_fn(1.0, |j| {
            let (x, y) = v[j.index()];
            Keypoint::new(j, f64::from(x), f64::from(y), 1.0)
        })
    })
}

proptest! {
    #![proptest_config(cases(500))]

    #[test]
    fn frame_matching_maximizes_correct_joints(
        preds in prop::collection::vec(clustered_pose(), 0..=3),
        gts in prop::collection::vec(full_gt(), 0..=3),
    ) {
        let t = PckhThreshold { factor: 4.0, ..PckhThreshold::default() };
        let m = match_poses_frame(&preds, &gts, &t);
        let total: usize = m.pairs.iter().map(PairScore::correct_count).sum();
        prop_assert_eq!(total, best_total(&preds, &gts, &t));
        prop_assert_eq!(m.pairs.len() + m.unmatched_preds.len(), preds.len());
        prop_assert_eq!(m.pairs.len() + m.unmatched_gts.len(), gts.len());
    }
}

#[test]
fn csv_tables_use_column_order() {
    let gt = vec![two_people(2)];
    let t = PckhThreshold::default();
    let ap = ap_csv(&evaluate_ap(&gt, &gt, &t).unwrap());
    assert_eq!(ap, "Head,Shou,Elb,Wri,Hip,Knee,Ankl,Total\n100.0,100.0,100.0,100.0,100.0,100.0,100.0,100.0\n");
    let mot = mot_csv(&evaluate_mot(&gt, &gt, &t).unwrap());
    assert!(mot.starts_with("Head,Shou,Elb,Wri,Hip,Knee,Ankl,Total,MOTP,Prec,Rec\n"));
}
