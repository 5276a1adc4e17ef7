//! Encoder-decoder sequence model: parameters, forward/backward passes,
//! optimizer, training loop, ensembling and persistence.

mod adam;
mod config;
mod ensemble;
mod gradcheck;
mod io;
mod linalg;
mod network;
mod params;
mod train;

#[cfg(test)]
mod tests;

use thiserror::Error;

pub use adam::Adam;
pub use config::{ModelConfig, TrainConfig, EOS, SOS, VOCAB_SIZE};
pub use ensemble::{EnsembleMember, EnsembleModel};
pub use io::{load_member, read_member, save_member, write_member, FORMAT_VERSION, MAGIC};
pub use gradcheck::{grad_check, GradCheckReport, RELATIVE_ERROR_FLOOR};
pub use linalg::softmax;
pub use network::{
    accumulate_gradient, argmax_token, decode_step, encode, greedy_decode, loss_and_gradient,
    sequence_loss, start_state, DecoderState, EncoderInput,
};
pub use params::{AttentionOffsets, GruOffsets, Layout, ModelParams};
pub use train::{
    evaluate_examples, member_seed, train_member, train_members, EpochLog, MemberData, StopReason, TrainingExample,
    TrainingLog,
};

pub type Result<T> = std::result::Result<T, ModelError>;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid token id {0}")]
    InvalidToken(usize),
    #[error("empty target sequence")]
    EmptyTarget,
    #[error("non-finite values in {0}")]
    NonFinite(String),
    #[error("training diverged: {0}")]
    Diverged(String),
    #[error("invalid training data: {0}")]
    InvalidData(String),
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Preprocess(#[from] crate::preprocess::PreprocessError),
}
