//! Top-down multi-person pose estimation and tracking toolkit.

pub mod ensemble;
pub mod error;
pub mod geometry;
pub mod heatmap;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod synth;
pub mod tracker;

pub use error::{Error, Result};
pub use geometry::{BBox, Point2};
pub use model::{EvalGroup, Frame, GroupValues, Joint, Keypoint, PerJoint, Pose, Sequence, TrackId};
