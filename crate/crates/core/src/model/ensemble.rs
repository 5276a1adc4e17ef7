use super::{EncoderInput, ModelConfig, ModelError, ModelParams, Result};
use crate::preprocess::NormalizationStats;

/// One trained model with the normalization fitted on its training subjects.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleMember {
    pub params: ModelParams,
    pub stats: NormalizationStats,
}

impl EnsembleMember {
    pub fn new(params: ModelParams, stats: NormalizationStats) -> Result<Self> {
        if stats.channel_count() != params.config.input_dim {
            return Err(ModelError::Shape(format!(
                "normalization has {} channels, model expects {}",
                stats.channel_count(),
                params.config.input_dim
            )));
        }
        Ok(Self { params, stats })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.params.config
    }

    /// Pools raw frames, then z-scores the pooled steps with this member's
    /// statistics. Pooling and per-channel affine scaling commute, so this
    /// equals normalizing frames first up to rounding.
    pub fn prepare_input(&self, frames: &[f64], channel_count: usize) -> Result<EncoderInput> {
        let pooled = EncoderInput::from_frames(frames, channel_count, self.config().input_stride)?;
        self.normalize_pooled(pooled)
    }

    pub fn normalize_pooled(&self, mut pooled: EncoderInput) -> Result<EncoderInput> {
        pooled.normalize(&self.stats)?;
        Ok(pooled)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleModel {
    members: Vec<EnsembleMember>,
}

impl EnsembleModel {
    pub fn new(members: Vec<EnsembleMember>) -> Result<Self> {
        let Some(first) = members.first() else {
            return Err(ModelError::InvalidConfig("an ensemble needs at least one member".into()));
        };
        if let Some(i) = members.iter().position(|m| m.params.config != first.params.config) {
            return Err(ModelError::InvalidConfig(format!("member {i} has a different model config")));
        }
        Ok(Self { members })
    }

    pub fn members(&self) -> &[EnsembleMember] {
        &self.members
    }

    pub fn into_members(self) -> Vec<EnsembleMember> {
        self.members
    }

    pub fn config(&self) -> &ModelConfig {
        &self.members[0].params.config
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}
