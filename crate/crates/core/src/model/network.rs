//! Forward and backward passes of the bidirectional-encoder / recurrent
//! decoder network.
//!
//! Cell equations (gate blocks stacked update, reset, candidate):
//!
//! ```text
//! z  = sigmoid(Wz x + bz + Uz h + cz)
//! r  = sigmoid(Wr x + br + Ur h + cr)
//! n  = tanh(Wn x + bn + r * (Un h + cn))
//! h' = (1 - z) * n + z * h
//! ```
//!
//! The context vector is `tanh(Wc [h_fwd(T); h_bwd(0)] + bc)` and initializes
//! the decoder state; the decoder reads token embeddings and emits logits
//! through a linear layer.
//!
//! With attention enabled every encoder position `t` gets a key
//! `k_t = Wa [h_fwd(t); h_bwd(t)]`. After each decoder step the new state `h`
//! scores the keys by `h . k_t`, the softmax weights give `c = sum a_t k_t`,
//! and the output layer reads `tanh(Wm [c; h] + bm)` instead of `h`.

use super::config::{EOS, SOS, VOCAB_SIZE};
use super::linalg::{axpy, dot, matvec_add, matvec_t_add, outer_add, sigmoid, softmax};
use std::sync::Arc;

use super::params::{AttentionOffsets, GruOffsets, ModelParams};
use super::{ModelError, Result};
use crate::dataset::PrimitiveClass;
use crate::preprocess::{NormalizationStats, Window};

/// Encoder input: frames averaged in blocks of `input_stride`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderInput {
    steps: usize,
    dim: usize,
    data: Vec<f64>,
}

impl EncoderInput {
    /// Averages consecutive blocks of `stride` frames; a trailing partial
    /// block is averaged over the frames it has.
    pub fn from_frames(frames: &[f64], channel_count: usize, stride: usize) -> Result<Self> {
        if channel_count == 0 || stride == 0 || frames.is_empty() || frames.len() % channel_count != 0 {
            return Err(ModelError::Shape(format!(
                "cannot pool {} values with {} channels and stride {}",
                frames.len(),
                channel_count,
                stride
            )));
        }
        let n = frames.len() / channel_count;
        let steps = n.div_ceil(stride);
        let mut data = vec![0.0; steps * channel_count];
        for (t, block) in frames.chunks(stride * channel_count).enumerate() {
            let out = &mut data[t * channel_count..(t + 1) * channel_count];
            let count = (block.len() / channel_count) as f64;
            for frame in block.chunks_exact(channel_count) {
                for (o, v) in out.iter_mut().zip(frame) {
                    *o += v;
                }
            }
            for o in out.iter_mut() {
                *o /= count;
            }
        }
        Ok(Self {
            steps,
            dim: channel_count,
            data,
        })
    }

    pub fn from_window(window: &Window, stride: usize) -> Result<Self> {
        Self::from_frames(&window.frames, window.channel_count, stride)
    }

    /// Uses `data` (`steps x dim`) as-is, without pooling.
    pub fn from_steps(data: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || data.is_empty() || data.len() % dim != 0 {
            return Err(ModelError::Shape("encoder steps must be whole rows".into()));
        }
        Ok(Self {
            steps: data.len() / dim,
            dim,
            data,
        })
    }

    /// Applies per-channel z-scoring to every step.
    pub fn normalize(&mut self, stats: &NormalizationStats) -> Result<()> {
        if stats.channel_count() != self.dim {
            return Err(ModelError::Shape(format!(
                "normalization has {} channels, input has {}",
                stats.channel_count(),
                self.dim
            )));
        }
        stats.normalize_in_place(&mut self.data)?;
        Ok(())
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn step(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }
}

/// Per-step activations of one recurrent cell over a sequence.
#[derive(Debug, Clone, Default)]
struct GruTrace {
    h_prev: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    n: Vec<f64>,
    /// `Un h + cn`, needed for the reset-gate gradient.
    ghn: Vec<f64>,
}

impl GruTrace {
    fn with_capacity(hidden: usize, steps: usize) -> Self {
        let cap = hidden * steps;
        Self {
            h_prev: Vec::with_capacity(cap),
            z: Vec::with_capacity(cap),
            r: Vec::with_capacity(cap),
            n: Vec::with_capacity(cap),
            ghn: Vec::with_capacity(cap),
        }
    }

    fn at(v: &[f64], hidden: usize, t: usize) -> &[f64] {
        &v[t * hidden..(t + 1) * hidden]
    }
}

/// Advances the cell one step, recording activations, and writes the new
/// state into `h_out`.
fn gru_forward(
    p: &[f64],
    g: &GruOffsets,
    x: &[f64],
    h_prev: &[f64],
    trace: &mut GruTrace,
    gx: &mut [f64],
    gh: &mut [f64],
    h_out: &mut [f64],
) {
    let h = g.hidden;
    gx.copy_from_slice(&p[g.b_x..g.b_x + 3 * h]);
    matvec_add(&p[g.w_x..g.w_x + 3 * h * g.input], g.input, x, gx);
    gh.copy_from_slice(&p[g.b_h..g.b_h + 3 * h]);
    matvec_add(&p[g.w_h..g.w_h + 3 * h * h], h, h_prev, gh);
    trace.h_prev.extend_from_slice(h_prev);
    for j in 0..h {
        let z = sigmoid(gx[j] + gh[j]);
        let r = sigmoid(gx[h + j] + gh[h + j]);
        let ghn = gh[2 * h + j];
        let n = (gx[2 * h + j] + r * ghn).tanh();
        h_out[j] = (1.0 - z) * n + z * h_prev[j];
        trace.z.push(z);
        trace.r.push(r);
        trace.n.push(n);
        trace.ghn.push(ghn);
    }
}

/// Back-propagates `dh` (gradient w.r.t. the step's output state) through
/// step `t`. Parameter gradients accumulate into `grad`; the gradient w.r.t.
/// the previous state is written to `dh_prev` and, if requested, the input
/// gradient accumulates into `dx`.
#[allow(clippy::too_many_arguments)]
fn gru_backward(
    p: &[f64],
    g: &GruOffsets,
    x: &[f64],
    trace: &GruTrace,
    t: usize,
    dh: &[f64],
    grad: &mut [f64],
    dh_prev: &mut [f64],
    dx: Option<&mut [f64]>,
    dgx: &mut [f64],
    dgh: &mut [f64],
) {
    let h = g.hidden;
    let h_prev = GruTrace::at(&trace.h_prev, h, t);
    let zs = GruTrace::at(&trace.z, h, t);
    let rs = GruTrace::at(&trace.r, h, t);
    let ns = GruTrace::at(&trace.n, h, t);
    let ghns = GruTrace::at(&trace.ghn, h, t);
    for j in 0..h {
        let (z, r, n) = (zs[j], rs[j], ns[j]);
        let dn_pre = dh[j] * (1.0 - z) * (1.0 - n * n);
        let dz_pre = dh[j] * (h_prev[j] - n) * z * (1.0 - z);
        let dr_pre = dn_pre * ghns[j] * r * (1.0 - r);
        dgx[j] = dz_pre;
        dgx[h + j] = dr_pre;
        dgx[2 * h + j] = dn_pre;
        dgh[j] = dz_pre;
        dgh[h + j] = dr_pre;
        dgh[2 * h + j] = dn_pre * r;
        dh_prev[j] = dh[j] * z;
    }
    outer_add(&mut grad[g.w_x..g.w_x + 3 * h * g.input], dgx, x);
    for (gb, d) in grad[g.b_x..g.b_x + 3 * h].iter_mut().zip(dgx.iter()) {
        *gb += d;
    }
    outer_add(&mut grad[g.w_h..g.w_h + 3 * h * h], dgh, h_prev);
    for (gb, d) in grad[g.b_h..g.b_h + 3 * h].iter_mut().zip(dgh.iter()) {
        *gb += d;
    }
    matvec_t_add(&p[g.w_h..g.w_h + 3 * h * h], h, dgh, dh_prev);
    if let Some(dx) = dx {
        matvec_t_add(&p[g.w_x..g.w_x + 3 * h * g.input], g.input, dgx, dx);
    }
}

struct EncoderTrace {
    fwd: GruTrace,
    bwd: GruTrace,
    /// `[h_fwd(T); h_bwd(0)]`.
    hcat: Vec<f64>,
    context: Vec<f64>,
    /// Per-position `[h_fwd(t); h_bwd(t)]`, only kept with attention.
    states: Vec<f64>,
    keys: Vec<f64>,
}

fn check_input(params: &ModelParams, input: &EncoderInput) -> Result<()> {
    if input.dim != params.config.input_dim {
        return Err(ModelError::Shape(format!(
            "encoder input has {} channels, model expects {}",
            input.dim, params.config.input_dim
        )));
    }
    Ok(())
}

fn run_encoder(params: &ModelParams, input: &EncoderInput) -> EncoderTrace {
    let h = params.config.hidden_dim;
    let p = &params.data;
    let lay = &params.layout;
    let steps = input.steps;
    let mut gx = vec![0.0; 3 * h];
    let mut gh = vec![0.0; 3 * h];

    let attention = lay.attention;
    let mut states = if attention.is_some() { vec![0.0; steps * 2 * h] } else { Vec::new() };

    let mut fwd = GruTrace::with_capacity(h, steps);
    let mut state = vec![0.0; h];
    let mut next = vec![0.0; h];
    for t in 0..steps {
        gru_forward(p, &lay.enc_fwd, input.step(t), &state, &mut fwd, &mut gx, &mut gh, &mut next);
        std::mem::swap(&mut state, &mut next);
        if attention.is_some() {
            states[t * 2 * h..t * 2 * h + h].copy_from_slice(&state);
        }
    }
    let h_fwd = state;

    let mut bwd = GruTrace::with_capacity(h, steps);
    let mut state = vec![0.0; h];
    for t in (0..steps).rev() {
        gru_forward(p, &lay.enc_bwd, input.step(t), &state, &mut bwd, &mut gx, &mut gh, &mut next);
        std::mem::swap(&mut state, &mut next);
        if attention.is_some() {
            states[t * 2 * h + h..(t + 1) * 2 * h].copy_from_slice(&state);
        }
    }
    let h_bwd = state;

    let mut hcat = h_fwd;
    hcat.extend_from_slice(&h_bwd);
    let mut context = p[lay.ctx_b..lay.ctx_b + h].to_vec();
    matvec_add(&p[lay.ctx_w..lay.ctx_w + h * 2 * h], 2 * h, &hcat, &mut context);
    for c in &mut context {
        *c = c.tanh();
    }
    let mut keys = Vec::new();
    if let Some(a) = attention {
        keys = vec![0.0; steps * h];
        let wa = &p[a.att_w..a.att_w + h * 2 * h];
        for t in 0..steps {
            matvec_add(wa, 2 * h, &states[t * 2 * h..(t + 1) * 2 * h], &mut keys[t * h..(t + 1) * h]);
        }
    }
    EncoderTrace {
        fwd,
        bwd,
        hcat,
        context,
        states,
        keys,
    }
}

/// Context vector for one window: the projected final forward and backward
/// encoder states.
pub fn encode(params: &ModelParams, input: &EncoderInput) -> Result<Vec<f64>> {
    check_input(params, input)?;
    Ok(run_encoder(params, input).context)
}

/// Decoder hidden state, plus the encoder keys when the model attends.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderState {
    pub hidden: Vec<f64>,
    pub keys: Option<Arc<Vec<f64>>>,
}

impl DecoderState {
    pub fn from_context(context: Vec<f64>) -> Self {
        Self { hidden: context, keys: None }
    }
}

/// Initial decoder state for one window.
pub fn start_state(params: &ModelParams, input: &EncoderInput) -> Result<DecoderState> {
    check_input(params, input)?;
    let enc = run_encoder(params, input);
    Ok(DecoderState {
        hidden: enc.context,
        keys: params.layout.attention.map(|_| Arc::new(enc.keys)),
    })
}

/// Attention weights, attended key and the mixed output state.
struct Readout {
    weights: Vec<f64>,
    attended: Vec<f64>,
    mixed: Vec<f64>,
}

fn attend(p: &[f64], a: &AttentionOffsets, keys: &[f64], h: &[f64]) -> Readout {
    let hd = h.len();
    let scores: Vec<f64> = keys.chunks_exact(hd).map(|k| dot(k, h)).collect();
    let weights = softmax(&scores);
    let mut attended = vec![0.0; hd];
    for (w, k) in weights.iter().zip(keys.chunks_exact(hd)) {
        for (c, kv) in attended.iter_mut().zip(k) {
            *c += w * kv;
        }
    }
    let mut ch = attended.clone();
    ch.extend_from_slice(h);
    let mut mixed = p[a.comb_b..a.comb_b + hd].to_vec();
    matvec_add(&p[a.comb_w..a.comb_w + hd * 2 * hd], 2 * hd, &ch, &mut mixed);
    for m in &mut mixed {
        *m = m.tanh();
    }
    Readout {
        weights,
        attended,
        mixed,
    }
}

fn embedding(params: &ModelParams, token: usize) -> &[f64] {
    let e = params.config.embed_dim;
    let off = params.layout.embed + token * e;
    &params.data[off..off + e]
}

fn logits_of(params: &ModelParams, h: &[f64]) -> Vec<f64> {
    let lay = &params.layout;
    let hd = params.config.hidden_dim;
    let mut logits = params.data[lay.out_b..lay.out_b + VOCAB_SIZE].to_vec();
    matvec_add(&params.data[lay.out_w..lay.out_w + VOCAB_SIZE * hd], hd, h, &mut logits);
    logits
}

/// One decoder step: the distribution over the 7 tokens and the next state.
pub fn decode_step(params: &ModelParams, state: &DecoderState, prev_token: usize) -> Result<(Vec<f64>, DecoderState)> {
    if prev_token >= VOCAB_SIZE {
        return Err(ModelError::InvalidToken(prev_token));
    }
    let h = params.config.hidden_dim;
    if state.hidden.len() != h {
        return Err(ModelError::Shape(format!(
            "decoder state has {} values, model expects {}",
            state.hidden.len(),
            h
        )));
    }
    let mut trace = GruTrace::with_capacity(h, 1);
    let mut gx = vec![0.0; 3 * h];
    let mut gh = vec![0.0; 3 * h];
    let mut next = vec![0.0; h];
    gru_forward(
        &params.data,
        &params.layout.dec,
        embedding(params, prev_token),
        &state.hidden,
        &mut trace,
        &mut gx,
        &mut gh,
        &mut next,
    );
    let probs = match (params.layout.attention, &state.keys) {
        (None, _) => softmax(&logits_of(params, &next)),
        (Some(a), Some(keys)) => {
            if keys.is_empty() || keys.len() % h != 0 {
                return Err(ModelError::Shape("encoder keys do not match the hidden size".into()));
            }
            softmax(&logits_of(params, &attend(&params.data, &a, keys, &next).mixed))
        }
        (Some(_), None) => {
            return Err(ModelError::Shape("attention model needs a state from start_state".into()));
        }
    };
    Ok((
        probs,
        DecoderState {
            hidden: next,
            keys: state.keys.clone(),
        },
    ))
}

/// Highest-probability emittable token (a class or EOS, never SOS); ties go
/// to the lowest code.
pub fn argmax_token(probs: &[f64]) -> usize {
    let mut best = 0;
    for k in 1..VOCAB_SIZE {
        if k == SOS {
            continue;
        }
        if probs[k] > probs[best] {
            best = k;
        }
    }
    best
}

/// Greedy decode of a single model.
pub fn greedy_decode(params: &ModelParams, input: &EncoderInput) -> Result<Vec<PrimitiveClass>> {
    let mut state = start_state(params, input)?;
    let mut prev = SOS;
    let mut out = Vec::new();
    for _ in 0..params.config.max_decode_len {
        let (probs, next) = decode_step(params, &state, prev)?;
        let tok = argmax_token(&probs);
        if tok == EOS {
            break;
        }
        out.push(PrimitiveClass::from_code(tok).expect("class token"));
        prev = tok;
        state = next;
    }
    Ok(out)
}

/// Teacher-forced decoder inputs (`SOS, t1..tn`) and labels (`t1..tn, EOS`).
fn teacher_forcing(target: &[PrimitiveClass]) -> (Vec<usize>, Vec<usize>) {
    let mut inputs = vec![SOS];
    inputs.extend(target.iter().map(|c| c.code()));
    let mut labels: Vec<usize> = target.iter().map(|c| c.code()).collect();
    labels.push(EOS);
    (inputs, labels)
}

/// Mean per-step cross-entropy under teacher forcing.
pub fn sequence_loss(params: &ModelParams, input: &EncoderInput, target: &[PrimitiveClass]) -> Result<f64> {
    check_input(params, input)?;
    if target.is_empty() {
        return Err(ModelError::EmptyTarget);
    }
    let (inputs, labels) = teacher_forcing(target);
    let mut state = start_state(params, input)?;
    let mut loss = 0.0;
    for (&tok, &label) in inputs.iter().zip(&labels) {
        let (probs, next) = decode_step(params, &state, tok)?;
        loss -= probs[label].ln();
        state = next;
    }
    Ok(loss / labels.len() as f64)
}

/// Adds `scale * d(loss)/d(params)` to `grad` and returns the loss.
pub fn accumulate_gradient(
    params: &ModelParams,
    input: &EncoderInput,
    target: &[PrimitiveClass],
    scale: f64,
    grad: &mut [f64],
) -> Result<f64> {
    check_input(params, input)?;
    if target.is_empty() {
        return Err(ModelError::EmptyTarget);
    }
    if grad.len() != params.len() {
        return Err(ModelError::Shape("gradient buffer length mismatch".into()));
    }
    let cfg = &params.config;
    let (h, e) = (cfg.hidden_dim, cfg.embed_dim);
    let p = &params.data;
    let lay = &params.layout;

    // forward
    let enc = run_encoder(params, input);
    let (inputs, labels) = teacher_forcing(target);
    let steps = labels.len();
    let mut dec = GruTrace::with_capacity(h, steps);
    let mut outs = Vec::with_capacity(steps * h);
    let mut probs_all = Vec::with_capacity(steps);
    let mut readouts = Vec::new();
    let mut gx = vec![0.0; 3 * h];
    let mut gh = vec![0.0; 3 * h];
    let mut state = enc.context.clone();
    let mut next = vec![0.0; h];
    let mut loss = 0.0;
    for (&tok, &label) in inputs.iter().zip(&labels) {
        gru_forward(p, &lay.dec, embedding(params, tok), &state, &mut dec, &mut gx, &mut gh, &mut next);
        let probs = match &lay.attention {
            Some(a) => {
                let ro = attend(p, a, &enc.keys, &next);
                let probs = softmax(&logits_of(params, &ro.mixed));
                readouts.push(ro);
                probs
            }
            None => softmax(&logits_of(params, &next)),
        };
        loss -= probs[label].ln();
        outs.extend_from_slice(&next);
        probs_all.push(probs);
        std::mem::swap(&mut state, &mut next);
    }
    let inv_steps = 1.0 / steps as f64;
    loss *= inv_steps;

    // backward through the decoder
    let s = scale * inv_steps;
    let mut dgx = vec![0.0; 3 * h];
    let mut dgh = vec![0.0; 3 * h];
    let mut dh = vec![0.0; h];
    let mut dh_prev = vec![0.0; h];
    let mut demb = vec![0.0; e];
    let mut dkeys = vec![0.0; enc.keys.len()];
    for step in (0..steps).rev() {
        let h_out = &outs[step * h..(step + 1) * h];
        let mut dlogits = probs_all[step].clone();
        dlogits[labels[step]] -= 1.0;
        for d in &mut dlogits {
            *d *= s;
        }
        let readout = match &lay.attention {
            Some(_) => &readouts[step].mixed[..],
            None => h_out,
        };
        outer_add(&mut grad[lay.out_w..lay.out_w + VOCAB_SIZE * h], &dlogits, readout);
        for (gb, d) in grad[lay.out_b..lay.out_b + VOCAB_SIZE].iter_mut().zip(&dlogits) {
            *gb += d;
        }
        match &lay.attention {
            None => matvec_t_add(&p[lay.out_w..lay.out_w + VOCAB_SIZE * h], h, &dlogits, &mut dh),
            Some(a) => {
                let ro = &readouts[step];
                let mut dmixed = vec![0.0; h];
                matvec_t_add(&p[lay.out_w..lay.out_w + VOCAB_SIZE * h], h, &dlogits, &mut dmixed);
                attend_backward(p, a, &enc.keys, h_out, ro, &dmixed, grad, &mut dh, &mut dkeys);
            }
        }

        demb.iter_mut().for_each(|v| *v = 0.0);
        gru_backward(
            p,
            &lay.dec,
            embedding(params, inputs[step]),
            &dec,
            step,
            &dh,
            grad,
            &mut dh_prev,
            Some(&mut demb),
            &mut dgx,
            &mut dgh,
        );
        let off = lay.embed + inputs[step] * e;
        for (gv, d) in grad[off..off + e].iter_mut().zip(&demb) {
            *gv += d;
        }
        std::mem::swap(&mut dh, &mut dh_prev);
    }

    // context projection
    let mut da = dh;
    for (d, c) in da.iter_mut().zip(&enc.context) {
        *d *= 1.0 - c * c;
    }
    outer_add(&mut grad[lay.ctx_w..lay.ctx_w + h * 2 * h], &da, &enc.hcat);
    for (gb, d) in grad[lay.ctx_b..lay.ctx_b + h].iter_mut().zip(&da) {
        *gb += d;
    }
    let mut dhcat = vec![0.0; 2 * h];
    matvec_t_add(&p[lay.ctx_w..lay.ctx_w + h * 2 * h], 2 * h, &da, &mut dhcat);

    // keys back to per-position encoder states
    let t_len = input.steps;
    let mut dstates = Vec::new();
    if let Some(a) = &lay.attention {
        dstates = vec![0.0; t_len * 2 * h];
        let wa = &p[a.att_w..a.att_w + h * 2 * h];
        for t in 0..t_len {
            let dk = &dkeys[t * h..(t + 1) * h];
            outer_add(&mut grad[a.att_w..a.att_w + h * 2 * h], dk, &enc.states[t * 2 * h..(t + 1) * 2 * h]);
            matvec_t_add(wa, 2 * h, dk, &mut dstates[t * 2 * h..(t + 1) * 2 * h]);
        }
    }

    // encoder, forward direction: trace step t read input t
    let mut dh: Vec<f64> = dhcat[..h].to_vec();
    for t in (0..t_len).rev() {
        if !dstates.is_empty() {
            axpy(1.0, &dstates[t * 2 * h..t * 2 * h + h], &mut dh);
        }
        gru_backward(p, &lay.enc_fwd, input.step(t), &enc.fwd, t, &dh, grad, &mut dh_prev, None, &mut dgx, &mut dgh);
        std::mem::swap(&mut dh, &mut dh_prev);
    }
    // backward direction: trace step k read input T-1-k
    let mut dh: Vec<f64> = dhcat[h..].to_vec();
    for k in (0..t_len).rev() {
        if !dstates.is_empty() {
            let t = t_len - 1 - k;
            axpy(1.0, &dstates[t * 2 * h + h..(t + 1) * 2 * h], &mut dh);
        }
        gru_backward(
            p,
            &lay.enc_bwd,
            input.step(t_len - 1 - k),
            &enc.bwd,
            k,
            &dh,
            grad,
            &mut dh_prev,
            None,
            &mut dgx,
            &mut dgh,
        );
        std::mem::swap(&mut dh, &mut dh_prev);
    }
    Ok(loss)
}

/// Back-propagates `dmixed` through [`attend`]: parameter gradients go to
/// `grad`, the decoder-state gradient adds to `dh` and key gradients add to
/// `dkeys`.
#[allow(clippy::too_many_arguments)]
fn attend_backward(
    p: &[f64],
    a: &AttentionOffsets,
    keys: &[f64],
    h_dec: &[f64],
    ro: &Readout,
    dmixed: &[f64],
    grad: &mut [f64],
    dh: &mut [f64],
    dkeys: &mut [f64],
) {
    let hd = h_dec.len();
    let du: Vec<f64> = dmixed.iter().zip(&ro.mixed).map(|(d, m)| d * (1.0 - m * m)).collect();
    let mut ch = ro.attended.clone();
    ch.extend_from_slice(h_dec);
    outer_add(&mut grad[a.comb_w..a.comb_w + hd * 2 * hd], &du, &ch);
    axpy(1.0, &du, &mut grad[a.comb_b..a.comb_b + hd]);
    let mut dch = vec![0.0; 2 * hd];
    matvec_t_add(&p[a.comb_w..a.comb_w + hd * 2 * hd], 2 * hd, &du, &mut dch);
    let (dc, dh_direct) = dch.split_at(hd);
    axpy(1.0, dh_direct, dh);

    let dw: Vec<f64> = keys.chunks_exact(hd).map(|k| dot(k, dc)).collect();
    let mean_dw = dot(&ro.weights, &dw);
    for (t, k) in keys.chunks_exact(hd).enumerate() {
        let w = ro.weights[t];
        let dscore = w * (dw[t] - mean_dw);
        axpy(dscore, k, dh);
        let dk = &mut dkeys[t * hd..(t + 1) * hd];
        axpy(w, dc, dk);
        axpy(dscore, h_dec, dk);
    }
}

/// Loss and its full gradient for one window.
pub fn loss_and_gradient(params: &ModelParams, input: &EncoderInput, target: &[PrimitiveClass]) -> Result<(f64, Vec<f64>)> {
    let mut grad = vec![0.0; params.len()];
    let loss = accumulate_gradient(params, input, target, 1.0, &mut grad)?;
    Ok((loss, grad))
}

/// Euclidean norm.
pub fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}
