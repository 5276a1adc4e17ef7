use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::{loss_and_gradient, norm, sequence_loss, EncoderInput};
use super::params::ModelParams;
use super::Result;
use crate::dataset::PrimitiveClass;

/// Gradients smaller than this are compared in absolute terms; below it the
/// finite-difference estimate is dominated by round-off.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub max_absolute_error: f64,
    pub checked: usize,
    pub gradient_norm: f64,
    pub loss: f64,
}

/// Compares the analytic gradient with central differences on `n_checks`
/// randomly chosen parameters (all of them if the model is smaller).
pub fn grad_check(
    params: &ModelParams,
    input: &EncoderInput,
    target: &[PrimitiveClass],
    epsilon: f64,
    n_checks: usize,
    seed: u64,
) -> Result<GradCheckReport> {
    let (loss, grad) = loss_and_gradient(params, input, target)?;
    let n = params.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices = sample(&mut rng, n, n_checks.min(n)).into_vec();
    indices.sort_unstable();

    let mut probe = params.clone();
    let mut max_rel = 0.0f64;
    let mut max_abs = 0.0f64;
    for &i in &indices {
        let orig = probe.data[i];
        probe.data[i] = orig + epsilon;
        let plus = sequence_loss(&probe, input, target)?;
        probe.data[i] = orig - epsilon;
        let minus = sequence_loss(&probe, input, target)?;
        probe.data[i] = orig;
        let numeric = (plus - minus) / (2.0 * epsilon);
        let abs = (numeric - grad[i]).abs();
        let rel = abs / grad[i].abs().max(numeric.abs()).max(RELATIVE_ERROR_FLOOR);
        max_abs = max_abs.max(abs);
        max_rel = max_rel.max(rel);
    }
    Ok(GradCheckReport {
        max_relative_error: max_rel,
        max_absolute_error: max_abs,
        checked: indices.len(),
        gradient_norm: norm(&grad),
        loss,
    })
}
