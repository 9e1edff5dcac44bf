//! Skeleton, pose and sequence types shared by every stage.

mod joint;
mod json;
mod pose;

pub use joint::{joint_group, EvalGroup, GroupValues, Joint, PerJoint};
pub use json::{load_sequence, save_predictions, save_predictions_pretty};
pub use pose::{Frame, Keypoint, Pose, Sequence, TrackId};
