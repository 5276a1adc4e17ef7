use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    accumulate_gradient, greedy_decode, Adam, EncoderInput, ModelConfig, ModelError, ModelParams, Result, TrainConfig,
};
use crate::dataset::PrimitiveClass;
use crate::eval::{align, tally, Metrics, OutcomeTallies};
use crate::preprocess::WindowOrigin;

/// A normalized, pooled window with its target tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub origin: WindowOrigin,
    pub input: EncoderInput,
    pub target: Vec<PrimitiveClass>,
}

/// Training and validation examples of one ensemble member.
#[derive(Debug, Clone, Default)]
pub struct MemberData {
    pub train: Vec<TrainingExample>,
    pub val: Vec<TrainingExample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_aer: f64,
    pub val_sensitivity: Option<f64>,
    pub val_fdr: Option<f64>,
    pub improved: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Patience,
    TargetReached,
    MaxEpochs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub seed: u64,
    pub epochs: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_val_aer: f64,
    pub stop_reason: StopReason,
}

/// Greedy-decodes every example and pools the outcome tallies.
pub fn evaluate_examples(params: &ModelParams, examples: &[TrainingExample]) -> Result<OutcomeTallies> {
    let mut total = OutcomeTallies::default();
    for ex in examples {
        let pred = greedy_decode(params, &ex.input)?;
        total.add(&tally(&align(&ex.target, &pred)));
    }
    Ok(total)
}

/// Pooled AER: summed edit distance over summed target length.
fn pooled_aer(t: &OutcomeTallies) -> Result<f64> {
    Metrics::from_tallies(t)
        .aer
        .ok_or_else(|| ModelError::InvalidData("validation targets are empty".into()))
}

/// Seed of the member trained on fold `fold` of a run seeded with `seed`.
pub fn member_seed(seed: u64, fold: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fold as u64);
    rng.gen()
}

fn check_examples(examples: &[TrainingExample], cfg: &ModelConfig, what: &str) -> Result<()> {
    if examples.is_empty() {
        return Err(ModelError::InvalidData(format!("no {what} examples")));
    }
    for ex in examples {
        if ex.input.dim() != cfg.input_dim {
            return Err(ModelError::Shape(format!(
                "{what} example {:?} has {} channels, model expects {}",
                ex.origin,
                ex.input.dim(),
                cfg.input_dim
            )));
        }
        if ex.target.is_empty() {
            return Err(ModelError::EmptyTarget);
        }
    }
    Ok(())
}

/// Trains one model with Adam under teacher forcing and keeps the parameters
/// of the epoch with the lowest validation AER. `train_cfg.seed` drives both
/// initialization and the per-epoch shuffle.
pub fn train_member(
    data: &MemberData,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
) -> Result<(ModelParams, TrainingLog)> {
    model_cfg.validate()?;
    train_cfg.validate()?;
    check_examples(&data.train, model_cfg, "training")?;
    check_examples(&data.val, model_cfg, "validation")?;

    // gradient accumulation follows window-origin order, shuffled by seed
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    order.sort_by(|&a, &b| data.train[a].origin.cmp(&data.train[b].origin));

    let mut params = ModelParams::init(model_cfg, train_cfg.seed)?;
    let mut adam = Adam::from_config(params.len(), train_cfg);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(train_cfg.seed);
    shuffle_rng.set_stream(1);
    let mut grad = vec![0.0; params.len()];

    let mut best = params.clone();
    let mut best_aer = f64::INFINITY;
    let mut best_epoch = 0;
    let mut stale = 0;
    let mut epochs = Vec::new();
    let mut stop_reason = StopReason::MaxEpochs;

    for epoch in 1..=train_cfg.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        for (b, batch) in order.chunks(train_cfg.batch_size).enumerate() {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let ex = &data.train[i];
                loss_sum += accumulate_gradient(&params, &ex.input, &ex.target, scale, &mut grad)?;
            }
            if !loss_sum.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(ModelError::Diverged(format!("non-finite loss or gradient at epoch {epoch}, batch {b}")));
            }
            adam.step(&mut params.data, &grad);
        }
        let train_loss = loss_sum / data.train.len() as f64;

        let tallies = evaluate_examples(&params, &data.val)?;
        let val_aer = pooled_aer(&tallies)?;
        let m = Metrics::from_tallies(&tallies);
        let improved = val_aer < best_aer;
        if improved {
            best_aer = val_aer;
            best_epoch = epoch;
            best.data.copy_from_slice(&params.data);
            stale = 0;
        } else {
            stale += 1;
        }
        epochs.push(EpochLog {
            epoch,
            train_loss,
            val_aer,
            val_sensitivity: m.sensitivity,
            val_fdr: m.fdr,
            improved,
        });
        if train_cfg.target_aer.is_some_and(|t| val_aer <= t) {
            stop_reason = StopReason::TargetReached;
            break;
        }
        if stale >= train_cfg.early_stop_patience {
            stop_reason = StopReason::Patience;
            break;
        }
    }

    let log = TrainingLog { seed: train_cfg.seed, epochs, best_epoch, best_val_aer: best_aer, stop_reason };
    Ok((best, log))
}

/// Trains one member per fold. Member `i` uses `member_seed(seed, i)`, so the
/// result does not depend on whether members train one after another or on
/// separate threads.
pub fn train_members(
    folds: &[MemberData],
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    concurrent: bool,
) -> Result<Vec<(ModelParams, TrainingLog)>> {
    let cfg_for = |i: usize| TrainConfig { seed: member_seed(train_cfg.seed, i), ..train_cfg.clone() };
    if !concurrent || folds.len() < 2 {
        return folds.iter().enumerate().map(|(i, d)| train_member(d, model_cfg, &cfg_for(i))).collect();
    }
    std::thread::scope(|s| {
        let handles: Vec<_> = folds
            .iter()
            .enumerate()
            .map(|(i, d)| {
                let cfg = cfg_for(i);
                s.spawn(move || train_member(d, model_cfg, &cfg))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(ModelError::Diverged("training thread panicked".into()))))
            .collect()
    })
}
