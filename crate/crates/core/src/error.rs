use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the pipeline stages.
#[derive(Debug, Error)]
pub enum Error {
    /// A document failed to parse or violated its schema. `path` names the
    /// offending element, e.g. `frames[0].poses[1].keypoints[3].confidence`.
    #[error("{path}: {message}")]
    Parse { path: String, message: String },

    /// Geometry that cannot produce a box (too few keypoints, zero area).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// An argument outside its documented domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Prediction and ground-truth sequences do not line up.
    #[error("misaligned sequences: {0}")]
    Misaligned(String),

    /// Tracking evaluation needs track ids on every pose.
    #[error("missing track id in sequence `{sequence}`, frame {frame}, pose {pose}")]
    MissingTrackId { sequence: String, frame: u64, pose: usize },
}

impl Error {
    pub(crate) fn parse(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse { path: path.into(), message: message.into() }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidArgument(message.into())
    }
}
