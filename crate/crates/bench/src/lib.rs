//! Deterministic inputs for the pipeline benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use topdown_core::geometry::BBox;
use topdown_core::heatmap::{Heatmap, HeatmapStack};
use topdown_core::pipeline::PipelineInput;
use topdown_core::synth::SynthSpec;
use topdown_core::tracker::CostMatrix;
use topdown_core::{Joint, Point2, Pose};

/// Calibrated synthetic detections and ground truth over `n_frames`.
pub fn calibrated_input(n_frames: u64) -> PipelineInput {
    PipelineInput::from_synth(&SynthSpec { n_frames, ..SynthSpec::posetrack_calibrated() })
        .expect("calibrated spec is valid")
}

/// Uniform costs in [0, 1).
pub fn cost_matrix(rows: usize, cols: usize, seed: u64) -> CostMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    CostMatrix::from_fn(rows, cols, |_, _| rng.random::<f64>()).expect("finite costs")
}

/// `n` scored boxes clustered so that suppression has work to do.
pub fn scored_boxes(n: usize, seed: u64) -> Vec<Pose> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let (x, y) = (rng.random_range(0.0..600.0), rng.random_range(0.0..400.0));
            let score = rng.random::<f64>();
            let mut p = Pose::empty(score);
            p.bbox = Some(BBox::new(x, y, x + 80.0, y + 160.0, score).expect("positive extent"));
            p
        })
        .collect()
}

/// A 15-map stack of `width` x `height` cells with one Gaussian blob per joint.
pub fn heatmap_stack(width: usize, height: usize) -> HeatmapStack {
    let maps = Joint::ALL
        .iter()
        .map(|&j| {
            let cx = (j.index() * 3 % width) as f64;
            let cy = (j.index() * 5 % height) as f64;
            let scores = (0..width * height)
                .map(|i| {
                    let (r, c) = ((i / width) as f64, (i % width) as f64);
                    (-((c - cx).powi(2) + (r - cy).powi(2)) / 8.0).exp()
                })
                .collect();
            Heatmap::new(j, width, height, 4.0, scores).expect("valid map")
        })
        .collect();
    HeatmapStack::new(maps, Point2::new(0.0, 0.0)).expect("one map per joint")
}
