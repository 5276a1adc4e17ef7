//! Signal preparation: sensor-centric quaternions, z-scoring, windowing and
//! per-window target sequences.

mod normalize;
mod quaternion;
mod target;
mod window;

use thiserror::Error;

pub use normalize::{apply_normalization, fit_normalization, invert_normalization, NormalizationStats};
pub use quaternion::{sensor_centric_transform, Quaternion, ReferencePolicy, SensorCentric};
pub use target::{derive_target_sequence, TargetSequence, DEFAULT_MAX_TOKENS, DEFAULT_MIN_OVERLAP_FRAMES};
pub use window::{
    core_starts, extract_window, make_windows, Window, WindowGeometry, WindowMode, WindowOrigin,
    WindowSpec,
};

pub type Result<T> = std::result::Result<T, PreprocessError>;

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("zero-norm quaternion at frame {frame}, channel {channel}")]
    ZeroNormQuaternion { frame: usize, channel: usize },
    #[error("channel count mismatch: expected {expected}, found {found}")]
    ChannelMismatch { expected: usize, found: usize },
    #[error("no recordings to fit normalization statistics on")]
    EmptyInput,
    #[error("recording has no frames")]
    EmptyRecording,
    #[error("invalid window spec: {0}")]
    InvalidWindowSpec(String),
    #[error(transparent)]
    Dataset(#[from] crate::dataset::DatasetError),
}
