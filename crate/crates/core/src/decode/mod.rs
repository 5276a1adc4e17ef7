//! Ensemble greedy decoding, boundary stitching and counting.

mod count;
mod stitch;

use serde::{Deserialize, Serialize};

use crate::dataset::PrimitiveClass;
use crate::model::{self, argmax_token, decode_step, DecoderState, EnsembleMember, ModelError, EOS, SOS, VOCAB_SIZE};
use crate::preprocess::{Window, WindowOrigin};

pub use count::{
    count, counting_error, write_counts_csv, CountingError, PrimitiveCounts, SessionReport,
};
pub use stitch::{stitch_windows, SessionPrediction, Stitcher};

#[derive(Debug, thiserror::Error)]
pub enum DecodeError {
    #[error("no ensemble members")]
    NoMembers,
    #[error("windows out of core-start order: {previous} then {next}")]
    Unsorted { previous: usize, next: usize },
    #[error("window from recording {found} in a stitch of {expected}")]
    MixedRecordings { expected: String, found: String },
    #[error("nothing to stitch")]
    EmptyInput,
    #[error("member {member} returned {len} probabilities")]
    BadDistribution { member: usize, len: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("csv export failed: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, DecodeError>;

/// Token sequence predicted for one window's core.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowPrediction {
    pub origin: WindowOrigin,
    pub tokens: Vec<PrimitiveClass>,
}

/// A model that can take part in ensemble decoding.
pub trait DecodeMember {
    /// Encodes the raw (unnormalized) window into an initial decoder state.
    fn start(&self, window: &Window) -> model::Result<DecoderState>;
    /// Distribution over all 7 tokens after feeding `prev_token`.
    fn step(&self, state: &DecoderState, prev_token: usize) -> model::Result<(Vec<f64>, DecoderState)>;
    fn max_decode_len(&self) -> usize;
}

impl DecodeMember for EnsembleMember {
    fn start(&self, window: &Window) -> model::Result<DecoderState> {
        let input = self.prepare_input(&window.frames, window.channel_count)?;
        model::start_state(&self.params, &input)
    }

    fn step(&self, state: &DecoderState, prev_token: usize) -> model::Result<(Vec<f64>, DecoderState)> {
        decode_step(&self.params, state, prev_token)
    }

    fn max_decode_len(&self) -> usize {
        self.config().max_decode_len
    }
}

/// Mean of the member distributions, written as `p0 + sum(pi - p0) / n` so
/// that identical members reproduce `p0` bit for bit.
fn average(dists: &[Vec<f64>]) -> Vec<f64> {
    let n = dists.len() as f64;
    let first = &dists[0];
    (0..VOCAB_SIZE)
        .map(|k| first[k] + dists[1..].iter().map(|d| d[k] - first[k]).sum::<f64>() / n)
        .collect()
}

/// Greedy decoding with the ensemble-averaged distribution fed back to every
/// member. Stops at EOS or after the shortest member limit.
pub fn decode_window<M: DecodeMember>(members: &[M], window: &Window) -> Result<WindowPrediction> {
    if members.is_empty() {
        return Err(DecodeError::NoMembers);
    }
    let mut states = members.iter().map(|m| m.start(window)).collect::<model::Result<Vec<_>>>()?;
    let max_len = members.iter().map(|m| m.max_decode_len()).min().unwrap_or(0);
    let mut tokens = Vec::new();
    let mut prev = SOS;
    for _ in 0..max_len {
        let mut dists = Vec::with_capacity(members.len());
        for (i, (member, state)) in members.iter().zip(states.iter_mut()).enumerate() {
            let (probs, next) = member.step(state, prev)?;
            if probs.len() != VOCAB_SIZE {
                return Err(DecodeError::BadDistribution { member: i, len: probs.len() });
            }
            dists.push(probs);
            *state = next;
        }
        let token = argmax_token(&average(&dists));
        if token == EOS {
            break;
        }
        // argmax_token never returns SOS
        tokens.push(PrimitiveClass::from_code(token).expect("class token"));
        prev = token;
    }
    Ok(WindowPrediction { origin: window.origin.clone(), tokens })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::PrimitiveClass::*;
    use crate::model::{greedy_decode, ModelConfig, ModelParams};
    use crate::preprocess::NormalizationStats;

    /// Emits a fixed distribution until it has produced `len` tokens, then EOS.
    struct Constant {
        probs: Vec<f64>,
        len: usize,
    }

    impl DecodeMember for Constant {
        fn start(&self, _: &Window) -> model::Result<DecoderState> {
            Ok(DecoderState::from_context(vec![0.0]))
        }
        fn step(&self, state: &DecoderState, _: usize) -> model::Result<(Vec<f64>, DecoderState)> {
            let step = state.hidden[0] as usize;
            let mut probs = self.probs.clone();
            if step >= self.len {
                probs = vec![0.0; VOCAB_SIZE];
                probs[EOS] = 1.0;
            }
            Ok((probs, DecoderState::from_context(vec![step as f64 + 1.0])))
        }
        fn max_decode_len(&self) -> usize {
            17
        }
    }

    fn dist(reach: f64, idle: f64) -> Vec<f64> {
        let mut p = vec![0.0; VOCAB_SIZE];
        p[Reach.code()] = reach;
        p[Idle.code()] = idle;
        p
    }

    fn window(ch: usize, len: usize, seed: u64) -> Window {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Window {
            frames: (0..ch * len).map(|_| rng.gen_range(-2.0..2.0)).collect(),
            channel_count: ch,
            core_start: 0,
            core_end: len,
            origin: WindowOrigin { recording: "r".into(), core_start: 0, core_end: len },
        }
    }

    #[test]
    fn averaged_distribution_picks_idle() {
        let members = [Constant { probs: dist(0.6, 0.4), len: 1 }, Constant { probs: dist(0.2, 0.8), len: 1 }];
        let avg = average(&[dist(0.6, 0.4), dist(0.2, 0.8)]);
        assert!((avg[Reach.code()] - 0.4).abs() < 1e-15);
        assert!((avg[Idle.code()] - 0.6).abs() < 1e-15);
        let pred = decode_window(&members, &window(2, 4, 0)).unwrap();
        assert_eq!(pred.tokens, vec![Idle]);
    }

    #[test]
    fn decoding_stops_at_member_limit() {
        let members = [Constant { probs: dist(0.9, 0.1), len: 100 }];
        assert_eq!(decode_window(&members, &window(2, 4, 0)).unwrap().tokens.len(), 17);
        let none: [Constant; 0] = [];
        assert!(matches!(decode_window(&none, &window(2, 4, 0)), Err(DecodeError::NoMembers)));
    }

    fn member(seed: u64) -> EnsembleMember {
        let cfg = ModelConfig { input_dim: 3, hidden_dim: 6, embed_dim: 4, input_stride: 5, max_decode_len: 9, attention: false };
        let stats = NormalizationStats { mean: vec![0.1, -0.2, 0.3], std: vec![1.5, 0.5, 2.0], source: "t".into() };
        EnsembleMember::new(ModelParams::init(&cfg, seed).unwrap(), stats).unwrap()
    }

    #[test]
    fn single_member_equals_greedy_decode() {
        let m = member(3);
        for seed in 0..20 {
            let w = window(3, 60, seed);
            let input = m.prepare_input(&w.frames, 3).unwrap();
            let want = greedy_decode(&m.params, &input).unwrap();
            assert_eq!(decode_window(std::slice::from_ref(&m), &w).unwrap().tokens, want);
        }
    }

    #[test]
    fn identical_members_equal_single_member() {
        let m = member(4);
        let four = vec![m.clone(), m.clone(), m.clone(), m.clone()];
        for seed in 0..20 {
            let w = window(3, 60, 100 + seed);
            assert_eq!(
                decode_window(&four, &w).unwrap().tokens,
                decode_window(std::slice::from_ref(&m), &w).unwrap().tokens
            );
        }
    }

    #[test]
    fn average_of_identical_distributions_is_exact() {
        let p = vec![0.1, 0.2, 0.3000000000000001, 0.15, 0.05, 0.0, 0.1999999999];
        assert_eq!(average(&[p.clone(), p.clone(), p.clone(), p.clone()]), p);
    }
}
