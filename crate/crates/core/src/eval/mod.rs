//! Sequence alignment, outcome taxonomy and metrics.

mod aggregate;
mod align;
mod metrics;

pub use aggregate::{aggregate, GroupBy, GroupMetrics, LabeledTallies, MeanStd, SubjectSpread};
pub use align::{align, alignment_cost, levenshtein, project_gt, project_pred, AlignmentOp};
pub use metrics::{
    confusion_matrix, f1_from_rates, metrics, spearman_rho, tally, ConfusionMatrix, Metrics, OutcomeTallies,
};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum EvalError {
    #[error("empty group: {0}")]
    EmptyGroup(String),
    #[error("length mismatch: {0} scores vs {1} values")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
}

pub type Result<T> = std::result::Result<T, EvalError>;
