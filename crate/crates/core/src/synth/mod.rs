//! Deterministic synthetic sequences with known tracks and corrupted detections.

mod oracle;
mod template;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use oracle::{analytic_counts, analytic_counts_with, AnalyticCounts};
pub use template::Skeleton;

use crate::error::{Error, Result};
use crate::geometry::{bbox_from_keypoints, BBox, Point2, DEFAULT_ENLARGE};
use crate::model::{EvalGroup, Frame, GroupValues, Keypoint, Pose, Sequence, TrackId};

/// Confidence `clamp(mean + spread * z, 0, 1)` with standard normal `z`.
///
/// `mean` may exceed 1 so that a share of keypoints saturates at full
/// confidence; `spread = 0` gives a constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfidenceModel {
    pub mean: f64,
    pub spread: f64,
}

impl ConfidenceModel {
    pub const fn new(mean: f64, spread: f64) -> Self {
        ConfidenceModel { mean, spread }
    }

    pub fn sample(&self, z: f64) -> f64 {
        (self.mean + self.spread * z).clamp(0.0, 1.0)
    }

    fn validate(&self, what: &str) -> Result<()> {
        if !self.mean.is_finite() || !(self.spread.is_finite() && self.spread >= 0.0) {
            return Err(Error::invalid(format!(
                "{what}: confidence model needs a finite mean and a non-negative spread"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Trajectory {
    /// Constant velocity, reflected at the image borders.
    #[default]
    Linear,
    /// Constant velocity plus a vertical sine of the given amplitude and period (frames).
    Sinusoidal { amplitude: f64, period: f64 },
}

/// Explicit start state for one person.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PersonInit {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
}

/// Frames `start..end` in which a person yields no detection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Occlusion {
    pub person: usize,
    pub start: u64,
    pub end: u64,
}

/// Generator parameters. Missing fields in config files take the
/// calibrated defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub name: String,
    pub n_persons: usize,
    pub n_frames: u64,
    pub width: u32,
    pub height: u32,
    pub trajectory: Trajectory,
    /// Horizontal speed (pixels per frame) of automatically placed persons.
    pub speed: f64,
    /// Explicit start states; empty means one horizontal lane per person.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub persons: Vec<PersonInit>,
    /// Skeleton scale; head size is `32 * scale` pixels.
    pub scale: f64,
    pub confidence: GroupValues<ConfidenceModel>,
    pub fp_confidence: ConfidenceModel,
    /// Per-axis coordinate noise std, pixels.
    pub jitter_std: f64,
    /// Extra per-axis std, pixels, scaled by `1 - confidence`.
    pub low_confidence_error: f64,
    /// Probability that a person yields no detection in a frame.
    pub p_miss: f64,
    /// Expected false poses per frame (Poisson).
    pub fp_rate: f64,
    /// Minimum distance between a false pose's center and any other pose center, pixels.
    pub fp_min_separation: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub occlusions: Vec<Occlusion>,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec::posetrack_calibrated()
    }
}

impl SynthSpec {
    /// Confidence and noise levels fitted to PoseTrack-like keypoint retention
    /// rates; six persons over 1000 frames.
    pub fn posetrack_calibrated() -> Self {
        let c = ConfidenceModel::new;
        SynthSpec {
            name: "synth".into(),
            n_persons: 6,
            n_frames: 1000,
            width: 1280,
            height: 720,
            trajectory: Trajectory::Linear,
            speed: 2.0,
            persons: Vec::new(),
            scale: 0.6,
            confidence: GroupValues([
                c(1.009, 0.346),
                c(1.066, 0.301),
                c(0.933, 0.364),
                c(0.846, 0.414),
                c(0.927, 0.406),
                c(0.890, 0.464),
                c(0.802, 0.462),
            ]),
            fp_confidence: c(0.45, 0.15),
            jitter_std: 1.0,
            low_confidence_error: 38.4,
            p_miss: 0.05,
            fp_rate: 0.5,
            fp_min_separation: 150.0,
            occlusions: Vec::new(),
            seed: 2018,
        }
    }

    /// Exact detections: full confidence, no noise, misses or false poses.
    pub fn noiseless(n_persons: usize, n_frames: u64, seed: u64) -> Self {
        SynthSpec {
            name: "noiseless".into(),
            n_persons,
            n_frames,
            confidence: GroupValues([ConfidenceModel::new(1.0, 0.0); EvalGroup::COUNT]),
            jitter_std: 0.0,
            low_confidence_error: 0.0,
            p_miss: 0.0,
            fp_rate: 0.0,
            seed,
            ..SynthSpec::posetrack_calibrated()
        }
    }

    pub fn head_size(&self) -> f64 {
        Skeleton::canonical().head_size(self.scale)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Degenerate(format!("image size {}x{} has zero area", self.width, self.height)));
        }
        if self.n_frames == 0 {
            return Err(Error::invalid("n_frames must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.p_miss) {
            return Err(Error::invalid(format!("p_miss {} outside [0, 1]", self.p_miss)));
        }
        let non_negative = [
            ("speed", self.speed),
            ("jitter_std", self.jitter_std),
            ("low_confidence_error", self.low_confidence_error),
            ("fp_rate", self.fp_rate),
            ("fp_min_separation", self.fp_min_separation),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(format!("{name} {v} must be finite and non-negative")));
            }
        }
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(Error::invalid(format!("scale {} must be positive", self.scale)));
        }
        for (g, m) in self.confidence.iter() {
            m.validate(g.label())?;
        }
        self.fp_confidence.validate("fp_confidence")?;
        if let Trajectory::Sinusoidal { amplitude, period } = self.trajectory {
            if !(amplitude.is_finite() && period.is_finite() && period > 0.0) {
                return Err(Error::invalid("sinusoidal trajectory needs finite amplitude and positive period"));
            }
        }
        if !self.persons.is_empty() {
            if self.persons.len() != self.n_persons {
                return Err(Error::invalid(format!(
                    "{} person start states for n_persons = {}",
                    self.persons.len(),
                    self.n_persons
                )));
            }
            for p in &self.persons {
                let finite = [p.x, p.y, p.vx, p.vy].iter().all(|v| v.is_finite());
                if !finite || p.scale.is_some_and(|s| !(s.is_finite() && s > 0.0)) {
                    return Err(Error::invalid("person start states must be finite with positive scale"));
                }
            }
        }
        for o in &self.occlusions {
            if o.person >= self.n_persons || o.start > o.end {
                return Err(Error::invalid(format!(
                    "occlusion {{person {}, {}..{}}} is out of range",
                    o.person, o.start, o.end
                )));
            }
        }
        Ok(())
    }

    fn occluded(&self, person: usize, frame: u64) -> bool {
        self.occlusions.iter().any(|o| o.person == person && (o.start..o.end).contains(&frame))
    }
}

/// Origin of one detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    /// Index of the generating person, equal to its ground-truth track id.
    Person(usize),
    FalsePositive,
}

impl Serialize for Provenance {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Provenance::Person(i) => serializer.serialize_u64(*i as u64),
            Provenance::FalsePositive => serializer.serialize_str("fp"),
        }
    }
}

impl<'de> Deserialize<'de> for Provenance {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Person(usize),
            Tag(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Person(i) => Ok(Provenance::Person(i)),
            Raw::Tag(s) if s == "fp" => Ok(Provenance::FalsePositive),
            Raw::Tag(s) => Err(serde::de::Error::custom(format_args!("unknown provenance `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    /// Ground truth; person `i` carries track id `i` in every frame.
    pub gt: Sequence,
    /// Detections without track ids.
    pub det: Sequence,
    /// `provenance[f][k]` is the origin of `det.frames[f].poses[k]`.
    pub provenance: Vec<Vec<Provenance>>,
}

impl SynthOutput {
    /// Sidecar document: `{"name", "frames": [{"index", "sources": [...]}]}`.
    pub fn provenance_json(&self) -> String {
        #[derive(Serialize)]
        struct FrameDoc<'a> {
            index: u64,
            sources: &'a [Provenance],
        }
        #[derive(Serialize)]
        struct Doc<'a> {
            name: &'a str,
            frames: Vec<FrameDoc<'a>>,
        }
        let doc = Doc {
            name: &self.det.name,
            frames: self
                .det
                .frames
                .iter()
                .zip(&self.provenance)
                .map(|(f, p)| FrameDoc { index: f.index, sources: p })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("provenance serializes")
    }
}

/// Folds `v` into `[lo, hi]` by mirror reflection; the midpoint when the range is empty.
fn reflect(v: f64, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return (lo + hi) / 2.0;
    }
    let len = hi - lo;
    let m = (v - lo).rem_euclid(2.0 * len);
    lo + if m > len { 2.0 * len - m } else { m }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

struct Person {
    init: PersonInit,
    scale: f64,
}

fn place_persons(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Vec<Person> {
    let skeleton = Skeleton::canonical();
    if !spec.persons.is_empty() {
        return spec.persons.iter().map(|&init| Person { init, scale: init.scale.unwrap_or(spec.scale) }).collect();
    }
    let (hx, _) = skeleton.half_extent(spec.scale);
    let (w, h) = (f64::from(spec.width), f64::from(spec.height));
    (0..spec.n_persons)
        .map(|i| {
            let u: f64 = rng.random();
            let x = if w > 2.0 * hx { hx + u * (w - 2.0 * hx) } else { w / 2.0 };
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            Person {
                init: PersonInit {
                    x,
                    y: (i as f64 + 0.5) * h / spec.n_persons as f64,
                    vx: sign * spec.speed,
                    vy: 0.0,
                    scale: None,
                },
                scale: spec.scale,
            }
        })
        .collect()
}

fn center_at(spec: &SynthSpec, person: &Person, index: usize, t: f64) -> Point2 {
    let (hx, hy) = Skeleton::canonical().half_extent(person.scale);
    let (w, h) = (f64::from(spec.width), f64::from(spec.height));
    let mut y = person.init.y + person.init.vy * t;
    if let Trajectory::Sinusoidal { amplitude, period } = spec.trajectory {
        y += amplitude * (std::f64::consts::TAU * t / period + index as f64).sin();
    }
    Point2::new(reflect(person.init.x + person.init.vx * t, hx, w - hx), reflect(y, hy, h - hy))
}

/// Sets the detection score to the mean keypoint confidence and attaches
/// `bbox`, rescored.
fn finish_detection(mut pose: Pose, bbox: BBox) -> Pose {
    let mean = pose.keypoints().iter().map(|k| k.confidence).sum::<f64>() / pose.keypoints().len() as f64;
    pose.det_score = mean;
    pose.bbox = Some(BBox { score: mean, ..bbox });
    pose
}

/// `b` with each corner coordinate shifted by `std * z`, corners kept ordered.
fn jitter_box(b: &BBox, std: f64, z: [f64; 4]) -> BBox {
    let (x1, x2) = (b.x1 + std * z[0], b.x2 + std * z[2]);
    let (y1, y2) = (b.y1 + std * z[1], b.y2 + std * z[3]);
    BBox { x1: x1.min(x2), y1: y1.min(y2), x2: x1.max(x2), y2: y1.max(y2), score: b.score }
}

/// Generates ground truth and detections. Pure in `spec`, seed included.
///
/// A person's detection box is its ground-truth box with jittered corners;
/// its keypoints carry the confidence-coupled localization error. False
/// poses take the box of their own keypoints.
pub fn generate(spec: &SynthSpec) -> Result<SynthOutput> {
    spec.validate()?;
    let skeleton = Skeleton::canonical();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let persons = place_persons(spec, &mut rng);
    let fp_count = (spec.fp_rate > 0.0)
        .then(|| Poisson::new(spec.fp_rate).map_err(|e| Error::invalid(format!("fp_rate: {e}"))))
        .transpose()?;
    let (w, h) = (f64::from(spec.width), f64::from(spec.height));

    let mut gt_frames = Vec::with_capacity(spec.n_frames as usize);
    let mut det_frames = Vec::with_capacity(spec.n_frames as usize);
    let mut provenance = Vec::with_capacity(spec.n_frames as usize);
    for f in 0..spec.n_frames {
        let mut gt = Frame::new(f, spec.width, spec.height);
        let mut det = Frame::new(f, spec.width, spec.height);
        let mut sources = Vec::new();
        let mut centers = Vec::with_capacity(persons.len());

        for (i, person) in persons.iter().enumerate() {
            let center = center_at(spec, person, i, f as f64);
            centers.push(center);
            let mut truth = Pose::from_fn(1.0, |j| {
                let p = skeleton.place(j, center, person.scale);
                Keypoint::new(j, p.x, p.y, 1.0)
            });
            truth.bbox = Some(bbox_from_keypoints(&truth, DEFAULT_ENLARGE)?);
            truth.track_id = Some(TrackId(i as u64));

            let missed = rng.random::<f64>() < spec.p_miss;
            let detection = Pose::from_fn(0.0, |j| {
                let (zc, zx, zy) = (normal(&mut rng), normal(&mut rng), normal(&mut rng));
                let c = spec.confidence[j.group()].sample(zc);
                let err = spec.low_confidence_error * (1.0 - c);
                let std = (spec.jitter_std * spec.jitter_std + err * err).sqrt();
                let t = truth.keypoint(j);
                Keypoint::new(j, t.x + std * zx, t.y + std * zy, c)
            });
            let zb: [f64; 4] = std::array::from_fn(|_| normal(&mut rng));
            if !missed && !spec.occluded(i, f) {
                let bbox = jitter_box(truth.bbox.as_ref().expect("set above"), spec.jitter_std, zb);
                det.poses.push(finish_detection(detection, bbox));
                sources.push(Provenance::Person(i));
            }
            gt.poses.push(truth);
        }

        let n_fp = fp_count.as_ref().map_or(0, |d| d.sample(&mut rng) as usize);
        let (hx, hy) = skeleton.half_extent(spec.scale);
        for _ in 0..n_fp {
            let mut spot = None;
            for _ in 0..32 {
                let (u, v): (f64, f64) = (rng.random(), rng.random());
                let c = Point2::new(
                    if w > 2.0 * hx { hx + u * (w - 2.0 * hx) } else { w / 2.0 },
                    if h > 2.0 * hy { hy + v * (h - 2.0 * hy) } else { h / 2.0 },
                );
                if centers.iter().all(|o| o.distance(&c) >= spec.fp_min_separation) {
                    spot = Some(c);
                    break;
                }
            }
            let Some(center) = spot else { continue };
            centers.push(center);
            let pose = Pose::from_fn(0.0, |j| {
                let (zc, zx, zy) = (normal(&mut rng), normal(&mut rng), normal(&mut rng));
                let p = skeleton.place(j, center, spec.scale);
                Keypoint::new(j, p.x + spec.jitter_std * zx, p.y + spec.jitter_std * zy, spec.fp_confidence.sample(zc))
            });
            let bbox = bbox_from_keypoints(&pose, DEFAULT_ENLARGE)?;
            det.poses.push(finish_detection(pose, bbox));
            sources.push(Provenance::FalsePositive);
        }

        gt_frames.push(gt);
        det_frames.push(det);
        provenance.push(sources);
    }

    Ok(SynthOutput {
        gt: Sequence::new(spec.name.clone(), gt_frames)?,
        det: Sequence::new(spec.name.clone(), det_frames)?,
        provenance,
    })
}

/// Generates several specs in parallel; results keep input order.
pub fn generate_many(specs: &[SynthSpec]) -> Result<Vec<SynthOutput>> {
    specs.par_iter().map(generate).collect()
}
