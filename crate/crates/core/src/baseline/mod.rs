//! Pointwise baseline: per-frame statistical features, a pluggable frame
//! classifier, Kaiser-window smoothing of the probability track, and collapse
//! into per-window token sequences.

mod features;
mod kaiser;
mod logistic;
mod track;

pub use features::{extract_all_features, extract_features, frame_labels, StatFeatures, DEFAULT_CONTEXT_FRAMES};
pub use kaiser::{beta_from_attenuation, bessel_i0, kaiser_weights, KaiserSmoother};
pub use logistic::{argmax_class, train_pointwise, LogisticRegression, PointwiseConfig, PointwiseClassifier, TrainingReport};
pub use track::{collapse, read_track_csv, smooth, write_track_csv, PointwiseTrack};

#[derive(Debug, thiserror::Error)]
pub enum BaselineError {
    #[error("kaiser window length must be odd and positive, got {0}")]
    WindowLength(usize),
    #[error("invalid kaiser beta {0}")]
    Beta(f64),
    #[error("row {row} sums to {sum}, expected 1")]
    NotStochastic { row: usize, sum: f64 },
    #[error("feature dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("no training samples")]
    NoSamples,
    #[error("pointwise training diverged at epoch {0}")]
    Diverged(usize),
    #[error("invalid pointwise config: {0}")]
    Config(String),
    #[error("track csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("track csv: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, BaselineError>;
