//! Oracle tests for the network: an independent scalar re-implementation of
//! the recurrences, softmax checks and finite-difference gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::dataset::PrimitiveClass::{self, *};

fn tiny_config(hidden: usize, input: usize) -> ModelConfig {
    ModelConfig {
        input_dim: input,
        hidden_dim: hidden,
        embed_dim: 3,
        input_stride: 1,
        max_decode_len: 17,
        attention: false,
    }
}

fn random_input(steps: usize, dim: usize, seed: u64) -> EncoderInput {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    EncoderInput::from_steps((0..steps * dim).map(|_| rng.gen_range(-1.5..1.5)).collect(), dim).unwrap()
}

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Straight-line cell step using named tensors and index arithmetic.
fn oracle_cell(p: &ModelParams, prefix: &str, x: &[f64], h: &[f64]) -> Vec<f64> {
    let hd = h.len();
    let wx = p.tensor(&format!("{prefix}.w_x")).unwrap();
    let wh = p.tensor(&format!("{prefix}.w_h")).unwrap();
    let bx = p.tensor(&format!("{prefix}.b_x")).unwrap();
    let bh = p.tensor(&format!("{prefix}.b_h")).unwrap();
    let ni = x.len();
    let lin = |w: &[f64], v: &[f64], cols: usize, row: usize| -> f64 {
        let mut s = 0.0;
        for c in 0..cols {
            s += w[row * cols + c] * v[c];
        }
        s
    };
    let mut out = vec![0.0; hd];
    for j in 0..hd {
        let z = sig(lin(wx, x, ni, j) + bx[j] + lin(wh, h, hd, j) + bh[j]);
        let r = sig(lin(wx, x, ni, hd + j) + bx[hd + j] + lin(wh, h, hd, hd + j) + bh[hd + j]);
        let n = (lin(wx, x, ni, 2 * hd + j) + bx[2 * hd + j] + r * (lin(wh, h, hd, 2 * hd + j) + bh[2 * hd + j])).tanh();
        out[j] = (1.0 - z) * n + z * h[j];
    }
    out
}

fn oracle_context(p: &ModelParams, input: &EncoderInput) -> Vec<f64> {
    let hd = p.config.hidden_dim;
    let mut hf = vec![0.0; hd];
    for t in 0..input.steps() {
        hf = oracle_cell(p, "enc_fwd", input.step(t), &hf);
    }
    let mut hb = vec![0.0; hd];
    for t in (0..input.steps()).rev() {
        hb = oracle_cell(p, "enc_bwd", input.step(t), &hb);
    }
    let cat: Vec<f64> = hf.iter().chain(&hb).copied().collect();
    let w = p.tensor("ctx.w").unwrap();
    let b = p.tensor("ctx.b").unwrap();
    (0..hd)
        .map(|j| {
            let mut s = b[j];
            for (c, v) in cat.iter().enumerate() {
                s += w[j * 2 * hd + c] * v;
            }
            s.tanh()
        })
        .collect()
}

fn oracle_step_probs(p: &ModelParams, h: &[f64], token: usize) -> (Vec<f64>, Vec<f64>) {
    let e = p.config.embed_dim;
    let emb = &p.tensor("embed").unwrap()[token * e..(token + 1) * e];
    let h2 = oracle_cell(p, "dec", emb, h);
    let w = p.tensor("out.w").unwrap();
    let b = p.tensor("out.b").unwrap();
    let hd = h.len();
    let logits: Vec<f64> = (0..VOCAB_SIZE)
        .map(|k| b[k] + (0..hd).map(|j| w[k * hd + j] * h2[j]).sum::<f64>())
        .collect();
    let z: f64 = logits.iter().map(|l| l.exp()).sum();
    (logits.iter().map(|l| l.exp() / z).collect(), h2)
}

#[test]
fn zero_parameters_give_zero_context_and_uniform_output() {
    let cfg = tiny_config(6, 5);
    let p = ModelParams::zeros(&cfg).unwrap();
    let input = random_input(12, 5, 1);
    let ctx = encode(&p, &input).unwrap();
    assert!(ctx.iter().all(|v| *v == 0.0));
    let (probs, _) = decode_step(&p, &DecoderState::from_context(ctx), SOS).unwrap();
    for q in probs {
        assert!((q - 1.0 / 7.0).abs() < 1e-15);
    }
    let loss = sequence_loss(&p, &input, &[Reach, Idle, Transport]).unwrap();
    assert!((loss - 7f64.ln()).abs() < 1e-12);
    assert!((7f64.ln() - 1.9459).abs() < 1e-4);
}

#[test]
fn encode_is_deterministic() {
    let cfg = tiny_config(8, 4);
    let p = ModelParams::init(&cfg, 2).unwrap();
    let input = random_input(20, 4, 3);
    let a = encode(&p, &input).unwrap();
    let b = encode(&p, &input).unwrap();
    assert_eq!(
        a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    );
}

#[test]
fn encode_matches_scalar_recurrence() {
    for seed in 0..5 {
        let cfg = tiny_config(5, 3);
        let p = ModelParams::init(&cfg, seed).unwrap();
        let input = random_input(9, 3, 100 + seed);
        let got = encode(&p, &input).unwrap();
        let want = oracle_context(&p, &input);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-12, "{g} vs {w}");
        }
    }
}

#[test]
fn decode_step_probabilities_are_normalized() {
    let cfg = tiny_config(7, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for seed in 0..20 {
        let p = ModelParams::init(&cfg, seed).unwrap();
        let state = DecoderState::from_context((0..7).map(|_| rng.gen_range(-1.0..1.0)).collect());
        for tok in 0..VOCAB_SIZE {
            let (probs, next) = decode_step(&p, &state, tok).unwrap();
            assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(probs.iter().all(|q| *q > 0.0 && *q < 1.0));
            let (want, want_h) = oracle_step_probs(&p, &state.hidden, tok);
            for (a, b) in probs.iter().zip(&want) {
                assert!((a - b).abs() < 1e-12);
            }
            for (a, b) in next.hidden.iter().zip(&want_h) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn decode_step_rejects_bad_token() {
    let cfg = tiny_config(3, 2);
    let p = ModelParams::zeros(&cfg).unwrap();
    let state = DecoderState::from_context(vec![0.0; 3]);
    assert!(matches!(decode_step(&p, &state, 7), Err(ModelError::InvalidToken(7))));
}

#[test]
fn single_large_logit_dominates() {
    let cfg = tiny_config(3, 2);
    let mut p = ModelParams::zeros(&cfg).unwrap();
    p.tensor_mut("out.b").unwrap()[2] = 20.0;
    let (probs, _) = decode_step(&p, &DecoderState::from_context(vec![0.0; 3]), SOS).unwrap();
    let direct = 20f64.exp() / (20f64.exp() + 6.0);
    assert!(probs[2] > 0.999);
    assert!((probs[2] - direct).abs() < 1e-15);
}

#[test]
fn loss_matches_hand_unrolled_two_token_computation() {
    let cfg = tiny_config(4, 3);
    let p = ModelParams::init(&cfg, 9).unwrap();
    let input = random_input(7, 3, 10);
    let target = [Transport, Stabilize];
    let h0 = oracle_context(&p, &input);
    let (p1, h1) = oracle_step_probs(&p, &h0, SOS);
    let (p2, h2) = oracle_step_probs(&p, &h1, Transport.code());
    let (p3, _) = oracle_step_probs(&p, &h2, Stabilize.code());
    let want = -(p1[Transport.code()].ln() + p2[Stabilize.code()].ln() + p3[EOS].ln()) / 3.0;
    let got = sequence_loss(&p, &input, &target).unwrap();
    assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    assert!(got >= 0.0);
}

/// Parameters that emit `reach` after SOS and EOS after `reach` with
/// probability 1 to machine precision.
fn saturated_params() -> ModelParams {
    let cfg = ModelConfig {
        input_dim: 2,
        hidden_dim: 2,
        embed_dim: 7,
        input_stride: 1,
        max_decode_len: 17,
        attention: false,
    };
    let mut p = ModelParams::zeros(&cfg).unwrap();
    {
        let emb = p.tensor_mut("embed").unwrap();
        for tok in 0..VOCAB_SIZE {
            emb[tok * 7 + tok] = 1.0;
        }
    }
    {
        // update gate shut, candidate copies the one-hot embedding
        let bx = p.tensor_mut("dec.b_x").unwrap();
        bx[0] = -60.0;
        bx[1] = -60.0;
    }
    {
        let wx = p.tensor_mut("dec.w_x").unwrap();
        // candidate rows are 4 and 5 (block 2 of hidden 2), columns = embed dims
        wx[4 * 7 + SOS] = 30.0;
        wx[5 * 7 + Reach.code()] = 30.0;
    }
    {
        let w = p.tensor_mut("out.w").unwrap();
        w[Reach.code() * 2] = 100.0;
        w[EOS * 2 + 1] = 100.0;
    }
    p
}

#[test]
fn confident_correct_model_has_zero_loss() {
    let p = saturated_params();
    let input = random_input(4, 2, 0);
    let loss = sequence_loss(&p, &input, &[Reach]).unwrap();
    assert!(loss.abs() < 1e-12, "loss {loss}");
    assert_eq!(greedy_decode(&p, &input).unwrap(), vec![Reach]);
    let report = grad_check(&p, &input, &[Reach], 1e-5, 200, 1).unwrap();
    assert!(report.gradient_norm < 1e-12, "{report:?}");
}

#[test]
fn analytic_gradient_matches_finite_differences() {
    for seed in 0..3 {
        let cfg = tiny_config(4, 6);
        let p = ModelParams::init(&cfg, seed).unwrap();
        let input = random_input(15, 6, 50 + seed);
        let target: Vec<PrimitiveClass> = [Reach, Idle, Reach, Stabilize][..2 + seed as usize].to_vec();
        let report = grad_check(&p, &input, &target, 1e-5, 250, seed).unwrap();
        assert!(report.checked >= 200);
        assert!(report.max_relative_error < 1e-4, "{report:?}");
    }
}

#[test]
fn gradient_of_every_parameter_small_model() {
    let cfg = ModelConfig {
        input_dim: 3,
        hidden_dim: 3,
        embed_dim: 2,
        input_stride: 1,
        max_decode_len: 5,
        attention: false,
    };
    let p = ModelParams::init(&cfg, 77).unwrap();
    let input = random_input(5, 3, 78);
    let report = grad_check(&p, &input, &[Idle, Transport, Idle], 1e-5, usize::MAX, 0).unwrap();
    assert_eq!(report.checked, p.len());
    assert!(report.max_relative_error < 1e-4, "{report:?}");
}

#[test]
fn grad_check_is_deterministic() {
    let cfg = tiny_config(4, 3);
    let p = ModelParams::init(&cfg, 5).unwrap();
    let input = random_input(6, 3, 6);
    let a = grad_check(&p, &input, &[Reach, Idle], 1e-5, 200, 3).unwrap();
    let b = grad_check(&p, &input, &[Reach, Idle], 1e-5, 200, 3).unwrap();
    assert_eq!(a, b);
}

#[test]
fn pooling_averages_blocks() {
    let frames: Vec<f64> = (0..10).map(|v| v as f64).collect(); // 5 frames x 2 channels
    let input = EncoderInput::from_frames(&frames, 2, 2).unwrap();
    assert_eq!(input.steps(), 3);
    assert_eq!(input.step(0), &[1.0, 2.0]);
    assert_eq!(input.step(1), &[5.0, 6.0]);
    assert_eq!(input.step(2), &[8.0, 9.0]);
}

#[test]
fn shape_errors() {
    let cfg = tiny_config(3, 4);
    let p = ModelParams::zeros(&cfg).unwrap();
    let input = random_input(3, 5, 0);
    assert!(matches!(encode(&p, &input), Err(ModelError::Shape(_))));
    let input = random_input(3, 4, 0);
    assert!(matches!(sequence_loss(&p, &input, &[]), Err(ModelError::EmptyTarget)));
}

fn oracle_states(p: &ModelParams, input: &EncoderInput) -> Vec<Vec<f64>> {
    let hd = p.config.hidden_dim;
    let n = input.steps();
    let mut fwd = Vec::new();
    let mut h = vec![0.0; hd];
    for t in 0..n {
        h = oracle_cell(p, "enc_fwd", input.step(t), &h);
        fwd.push(h.clone());
    }
    let mut bwd = vec![Vec::new(); n];
    let mut h = vec![0.0; hd];
    for t in (0..n).rev() {
        h = oracle_cell(p, "enc_bwd", input.step(t), &h);
        bwd[t] = h.clone();
    }
    fwd.into_iter().zip(bwd).map(|(f, b)| f.into_iter().chain(b).collect()).collect()
}

/// One attended decoder step from named tensors: new state, keys, softmax
/// weights, mix, logits.
fn oracle_attention_probs(p: &ModelParams, input: &EncoderInput, h: &[f64], token: usize) -> Vec<f64> {
    let hd = h.len();
    let e = p.config.embed_dim;
    let emb = &p.tensor("embed").unwrap()[token * e..(token + 1) * e];
    let h2 = oracle_cell(p, "dec", emb, h);
    let wa = p.tensor("att.w").unwrap();
    let keys: Vec<Vec<f64>> = oracle_states(p, input)
        .iter()
        .map(|s| (0..hd).map(|j| (0..2 * hd).map(|c| wa[j * 2 * hd + c] * s[c]).sum()).collect())
        .collect();
    let scores: Vec<f64> = keys.iter().map(|k| k.iter().zip(&h2).map(|(a, b)| a * b).sum()).collect();
    let zmax = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = scores.iter().map(|s| (s - zmax).exp()).sum();
    let w: Vec<f64> = scores.iter().map(|s| (s - zmax).exp() / z).collect();
    let c: Vec<f64> = (0..hd).map(|j| keys.iter().zip(&w).map(|(k, wt)| wt * k[j]).sum()).collect();
    let cat: Vec<f64> = c.iter().chain(&h2).copied().collect();
    let wm = p.tensor("comb.w").unwrap();
    let bm = p.tensor("comb.b").unwrap();
    let mixed: Vec<f64> = (0..hd)
        .map(|j| (bm[j] + (0..2 * hd).map(|c| wm[j * 2 * hd + c] * cat[c]).sum::<f64>()).tanh())
        .collect();
    let wo = p.tensor("out.w").unwrap();
    let bo = p.tensor("out.b").unwrap();
    let logits: Vec<f64> = (0..VOCAB_SIZE)
        .map(|k| bo[k] + (0..hd).map(|j| wo[k * hd + j] * mixed[j]).sum::<f64>())
        .collect();
    let z: f64 = logits.iter().map(|l| l.exp()).sum();
    logits.iter().map(|l| l.exp() / z).collect()
}

fn attention_config(hidden: usize, input: usize) -> ModelConfig {
    ModelConfig {
        attention: true,
        ..tiny_config(hidden, input)
    }
}

#[test]
fn attention_step_matches_oracle() {
    let cfg = attention_config(5, 4);
    let p = ModelParams::init(&cfg, 21).unwrap();
    let input = random_input(9, 4, 22);
    let state = start_state(&p, &input).unwrap();
    assert_eq!(state.keys.as_ref().unwrap().len(), 9 * 5);
    let ctx = oracle_context(&p, &input);
    for (a, b) in state.hidden.iter().zip(&ctx) {
        assert!((a - b).abs() < 1e-12);
    }
    let (probs, next) = decode_step(&p, &state, SOS).unwrap();
    let expected = oracle_attention_probs(&p, &input, &ctx, SOS);
    for (a, b) in probs.iter().zip(&expected) {
        assert!((a - b).abs() < 1e-12, "{probs:?} vs {expected:?}");
    }
    let (probs2, _) = decode_step(&p, &next, Reach.code()).unwrap();
    let expected2 = oracle_attention_probs(&p, &input, &next.hidden, Reach.code());
    for (a, b) in probs2.iter().zip(&expected2) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn attention_model_needs_encoder_keys() {
    let cfg = attention_config(3, 2);
    let p = ModelParams::init(&cfg, 0).unwrap();
    let state = DecoderState::from_context(vec![0.0; 3]);
    assert!(matches!(decode_step(&p, &state, SOS), Err(ModelError::Shape(_))));
}

#[test]
fn attention_gradient_of_every_parameter() {
    for seed in 0..2 {
        let cfg = ModelConfig {
            embed_dim: 2,
            ..attention_config(3, 3)
        };
        let p = ModelParams::init(&cfg, 90 + seed).unwrap();
        let input = random_input(6, 3, 91 + seed);
        let report = grad_check(&p, &input, &[Stabilize, Reach, Stabilize], 1e-5, usize::MAX, 0).unwrap();
        assert_eq!(report.checked, p.len());
        assert!(report.max_relative_error < 1e-4, "{report:?}");
    }
}

#[test]
fn attention_gradient_sampled_larger_model() {
    let cfg = attention_config(8, 5);
    let p = ModelParams::init(&cfg, 4).unwrap();
    let input = random_input(20, 5, 5);
    let report = grad_check(&p, &input, &[Reach, Transport, Idle, Reposition], 1e-5, 400, 9).unwrap();
    assert!(report.max_relative_error < 1e-4, "{report:?}");
}
