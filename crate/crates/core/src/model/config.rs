use serde::{Deserialize, Serialize};

use super::{ModelError, Result};
use crate::preprocess::DEFAULT_MAX_TOKENS;

/// Five primitive classes plus start and end markers.
pub const VOCAB_SIZE: usize = 7;
pub const SOS: usize = 5;
pub const EOS: usize = 6;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub input_dim: usize,
    /// 3072 at full scale; the desk default is 64.
    pub hidden_dim: usize,
    pub embed_dim: usize,
    /// Consecutive frames averaged into one encoder step.
    pub input_stride: usize,
    pub max_decode_len: usize,
    /// Dot-product attention over the encoder states at every decoder step.
    #[serde(default)]
    pub attention: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            input_dim: 77,
            hidden_dim: 64,
            embed_dim: 16,
            input_stride: 10,
            max_decode_len: DEFAULT_MAX_TOKENS + 1,
            attention: false,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(ModelError::InvalidConfig(m.to_string()));
        if self.input_dim == 0 {
            return bad("input_dim must be positive");
        }
        if self.hidden_dim == 0 {
            return bad("hidden_dim must be positive");
        }
        if self.embed_dim == 0 {
            return bad("embed_dim must be positive");
        }
        if self.input_stride == 0 {
            return bad("input_stride must be positive");
        }
        if self.max_decode_len == 0 {
            return bad("max_decode_len must be positive");
        }
        Ok(())
    }

    pub fn vocab_size(&self) -> usize {
        VOCAB_SIZE
    }

    /// Longest emitted token sequence (one decode step is reserved for EOS).
    pub fn max_tokens(&self) -> usize {
        self.max_decode_len.saturating_sub(1).max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a validation AER improvement before stopping.
    pub early_stop_patience: usize,
    /// Stop as soon as validation AER reaches this value.
    #[serde(default)]
    pub target_aer: Option<f64>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 5e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 32,
            max_epochs: 100,
            early_stop_patience: 10,
            target_aer: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(ModelError::InvalidConfig(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("adam betas must lie in [0, 1)");
        }
        if self.epsilon <= 0.0 {
            return bad("epsilon must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if self.early_stop_patience == 0 {
            return bad("early_stop_patience must be at least 1");
        }
        Ok(())
    }
}
