//! Per-candidate heatmap post-processing: peak decoding with quarter-cell
//! refinement, cross-heatmap pose NMS, and hard-keypoint selection.
//!
//! The cross-heatmap NMS here is a peak-collision-avoidance procedure: joints
//! claim peaks in order of confidence, and a joint whose best peak lands
//! within `radius` of a different joint's accepted peak moves on to its next
//! local maximum. With `radius == 0` it reduces to independent argmax
//! decoding.

use std::cmp::Ordering;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::model::{Joint, Keypoint, PerJoint};

/// Local maxima considered per map by [`cross_heatmap_nms`].
pub const MAX_PEAKS_PER_MAP: usize = 5;

/// Hard keypoints kept by default in [`ohkm_select`].
pub const DEFAULT_OHKM_K: usize = 7;

/// Row-major score grid for one joint.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    joint: Joint,
    width: usize,
    height: usize,
    stride: f64,
    scores: Vec<f64>,
}

impl Heatmap {
    pub fn new(joint: Joint, width: usize, height: usize, stride: f64, scores: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid(format!("heatmap for {joint} has empty grid {width}x{height}")));
        }
        if scores.len() != width * height {
            return Err(Error::invalid(format!(
                "heatmap for {joint}: expected {} scores, got {}",
                width * height,
                scores.len()
            )));
        }
        if !(stride.is_finite() && stride > 0.0) {
            return Err(Error::invalid(format!("heatmap stride {stride} must be positive")));
        }
        if let Some(v) = scores.iter().find(|v| !(v.is_finite() && (0.0..=1.0).contains(*v))) {
            return Err(Error::invalid(format!("heatmap for {joint} has score {v} outside [0, 1]")));
        }
        Ok(Heatmap { joint, width, height, stride, scores })
    }

    pub fn joint(&self) -> Joint {
        self.joint
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn stride(&self) -> f64 {
        self.stride
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.scores[row * self.width + col]
    }

    /// Cell of the global maximum; ties go to the smallest row, then column.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, &v) in self.scores.iter().enumerate() {
            if v > self.scores[best] {
                best = i;
            }
        }
        (best / self.width, best % self.width)
    }

    /// Cells that are >= all of their 8 neighbours, best first (ties by row, column).
    pub fn local_maxima(&self, limit: usize) -> Vec<(usize, usize)> {
        let mut peaks = Vec::new();
        for row in 0..self.height {
            for col in 0..self.width {
                let v = self.get(row, col);
                let mut is_peak = true;
                'scan: for dr in -1i64..=1 {
                    for dc in -1i64..=1 {
                        if dr == 0 && dc == 0 {
                            continue;
                        }
                        let (r, c) = (row as i64 + dr, col as i64 + dc);
                        if r < 0 || c < 0 || r >= self.height as i64 || c >= self.width as i64 {
                            continue;
                        }
                        if self.get(r as usize, c as usize) > v {
                            is_peak = false;
                            break 'scan;
                        }
                    }
                }
                if is_peak {
                    peaks.push((row, col));
                }
            }
        }
        peaks.sort_by(|a, b| {
            self.get(b.0, b.1).partial_cmp(&self.get(a.0, a.1)).unwrap_or(Ordering::Equal).then(a.cmp(b))
        });
        peaks.truncate(limit);
        peaks
    }

    /// Quarter-cell shift toward the larger in-axis neighbour; zero at borders and ties.
    fn refinement(&self, row: usize, col: usize) -> (f64, f64) {
        let shift = |lo: Option<f64>, hi: Option<f64>| match (lo, hi) {
            (Some(lo), Some(hi)) if hi > lo => 0.25,
            (Some(lo), Some(hi)) if lo > hi => -0.25,
            _ => 0.0,
        };
        let sx =
            shift(col.checked_sub(1).map(|c| self.get(row, c)), (col + 1 < self.width).then(|| self.get(row, col + 1)));
        let sy = shift(
            row.checked_sub(1).map(|r| self.get(r, col)),
            (row + 1 < self.height).then(|| self.get(row + 1, col)),
        );
        (sx, sy)
    }

    /// Pixel location of a cell, optionally refined.
    pub fn cell_to_pixel(&self, row: usize, col: usize, origin: Point2, refine: bool) -> Point2 {
        let (sx, sy) = if refine { self.refinement(row, col) } else { (0.0, 0.0) };
        Point2::new(origin.x + self.stride * (col as f64 + 0.5 + sx), origin.y + self.stride * (row as f64 + 0.5 + sy))
    }

    fn keypoint_at(&self, row: usize, col: usize, origin: Point2, refine: bool) -> Keypoint {
        let p = self.cell_to_pixel(row, col, origin, refine);
        Keypoint::new(self.joint, p.x, p.y, self.get(row, col))
    }
}

/// Decoding switches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecodeOptions {
    pub refine: bool,
}

impl Default for DecodeOptions {
    fn default() -> Self {
        DecodeOptions { refine: true }
    }
}

/// Argmax decoding with quarter-cell refinement.
pub fn decode_argmax(h: &Heatmap, origin: Point2) -> Keypoint {
    decode_argmax_with(h, origin, DecodeOptions::default())
}

pub fn decode_argmax_with(h: &Heatmap, origin: Point2, opts: DecodeOptions) -> Keypoint {
    let (row, col) = h.argmax();
    h.keypoint_at(row, col, origin, opts.refine)
}

/// The 15 heatmaps of one candidate crop.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapStack {
    maps: Vec<Heatmap>,
    /// Top-left pixel of the crop.
    pub origin: Point2,
}

impl HeatmapStack {
    pub fn new(maps: Vec<Heatmap>, origin: Point2) -> Result<Self> {
        if maps.len() != Joint::COUNT {
            return Err(Error::invalid(format!("expected {} heatmaps, got {}", Joint::COUNT, maps.len())));
        }
        for (i, m) in maps.iter().enumerate() {
            if m.joint != Joint::ALL[i] {
                return Err(Error::invalid(format!(
                    "heatmap {i} is for {} but slot belongs to {}",
                    m.joint,
                    Joint::ALL[i]
                )));
            }
            if (m.width, m.height, m.stride) != (maps[0].width, maps[0].height, maps[0].stride) {
                return Err(Error::invalid(format!("heatmap for {} differs in shape or stride", m.joint)));
            }
        }
        if !(origin.x.is_finite() && origin.y.is_finite()) {
            return Err(Error::invalid("heatmap origin must be finite"));
        }
        Ok(HeatmapStack { maps, origin })
    }

    pub fn map(&self, joint: Joint) -> &Heatmap {
        &self.maps[joint.index()]
    }

    pub fn maps(&self) -> &[Heatmap] {
        &self.maps
    }

    /// Parses the JSON heatmap fixture:
    /// `{"origin": [x, y], "stride": s, "width": w, "height": h, "maps": {"nose": [w*h floats], ...}}`.
    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Doc {
            #[serde(default)]
            origin: [f64; 2],
            stride: f64,
            width: usize,
            height: usize,
            maps: PerJoint<Vec<f64>>,
        }
        let de = &mut serde_json::Deserializer::from_str(text);
        let doc: Doc = serde_path_to_error::deserialize(de)
            .map_err(|e| Error::parse(e.path().to_string(), e.into_inner().to_string()))?;
        let maps = Joint::ALL
            .iter()
            .map(|&j| {
                Heatmap::new(j, doc.width, doc.height, doc.stride, doc.maps[j].clone())
                    .map_err(|e| Error::parse(format!("maps.{j}"), e.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        HeatmapStack::new(maps, Point2::new(doc.origin[0], doc.origin[1]))
    }
}

/// Output of [`cross_heatmap_nms`].
#[derive(Debug, Clone, PartialEq)]
pub struct PoseNms {
    /// One keypoint per joint, in joint order.
    pub keypoints: Vec<Keypoint>,
    /// Joints whose every candidate peak was suppressed and which fell back to argmax.
    pub fallbacks: Vec<Joint>,
}

/// Cross-heatmap pose NMS.
///
/// Each map contributes up to [`MAX_PEAKS_PER_MAP`] local maxima. Joints are
/// processed by descending best-peak score (ties by joint order); a joint
/// takes its first peak lying at least `radius` pixels from every peak
/// already accepted for other joints. If none qualifies it falls back to
/// plain argmax decoding and is reported in `fallbacks`.
///
/// This is one workable definition of cross-joint suppression; other
/// variants exist and are not reproduced here.
pub fn cross_heatmap_nms(stack: &HeatmapStack, radius: f64) -> Result<PoseNms> {
    cross_heatmap_nms_with(stack, radius, DecodeOptions::default())
}

pub fn cross_heatmap_nms_with(stack: &HeatmapStack, radius: f64, opts: DecodeOptions) -> Result<PoseNms> {
    if !(radius.is_finite() && radius >= 0.0) {
        return Err(Error::invalid(format!("NMS radius {radius} must be >= 0")));
    }
    let candidates: Vec<Vec<(usize, usize)>> = stack.maps.iter().map(|m| m.local_maxima(MAX_PEAKS_PER_MAP)).collect();

    let top = |j: usize| candidates[j].first().map_or(f64::NEG_INFINITY, |&(r, c)| stack.maps[j].get(r, c));
    let mut order: Vec<usize> = (0..Joint::COUNT).collect();
    order.sort_by(|&a, &b| top(b).partial_cmp(&top(a)).unwrap_or(Ordering::Equal).then(a.cmp(&b)));

    let mut accepted: Vec<Option<Keypoint>> = vec![None; Joint::COUNT];
    let mut fallbacks = Vec::new();
    for j in order {
        let map = &stack.maps[j];
        let choice = candidates[j].iter().find_map(|&(r, c)| {
            let kp = map.keypoint_at(r, c, stack.origin, opts.refine);
            let clear = accepted.iter().flatten().all(|other| other.distance(&kp) >= radius);
            clear.then_some(kp)
        });
        accepted[j] = Some(match choice {
            Some(kp) => kp,
            None => {
                fallbacks.push(Joint::ALL[j]);
                decode_argmax_with(map, stack.origin, opts)
            }
        });
    }
    fallbacks.sort();
    Ok(PoseNms { keypoints: accepted.into_iter().map(|k| k.expect("every joint visited")).collect(), fallbacks })
}

/// Online hard keypoint mining: indices of the `k` largest losses, ascending.
/// Ties prefer the lower joint index.
pub fn ohkm_select(losses: &[f64], k: usize) -> Result<Vec<usize>> {
    if losses.len() != Joint::COUNT {
        return Err(Error::invalid(format!("expected {} losses, got {}", Joint::COUNT, losses.len())));
    }
    if !(1..=Joint::COUNT).contains(&k) {
        return Err(Error::invalid(format!("k = {k} outside 1..={}", Joint::COUNT)));
    }
    if let Some(v) = losses.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::invalid(format!("loss {v} must be finite and non-negative")));
    }
    let mut idx: Vec<usize> = (0..losses.len()).collect();
    idx.sort_by(|&a, &b| losses[b].partial_cmp(&losses[a]).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
    idx.truncate(k);
    idx.sort_unstable();
    Ok(idx)
}
