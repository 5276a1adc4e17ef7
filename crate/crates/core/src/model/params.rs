use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{ModelConfig, VOCAB_SIZE};
use super::{ModelError, Result};

/// Offsets of one gated recurrent cell inside the flat parameter vector.
/// Gate blocks are stacked in the order update, reset, candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GruOffsets {
    pub input: usize,
    pub hidden: usize,
    pub w_x: usize,
    pub w_h: usize,
    pub b_x: usize,
    pub b_h: usize,
}

impl GruOffsets {
    fn new(start: usize, input: usize, hidden: usize) -> (Self, usize) {
        let w_x = start;
        let w_h = w_x + 3 * hidden * input;
        let b_x = w_h + 3 * hidden * hidden;
        let b_h = b_x + 3 * hidden;
        let end = b_h + 3 * hidden;
        (
            Self {
                input,
                hidden,
                w_x,
                w_h,
                b_x,
                b_h,
            },
            end,
        )
    }
}

/// Attention tensors: `att.w` maps encoder states to keys, `comb.*` mixes
/// the attended key with the decoder state before the output layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttentionOffsets {
    pub att_w: usize,
    pub comb_w: usize,
    pub comb_b: usize,
}

/// Position of every tensor in [`ModelParams::data`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub enc_fwd: GruOffsets,
    pub enc_bwd: GruOffsets,
    pub ctx_w: usize,
    pub ctx_b: usize,
    pub embed: usize,
    pub dec: GruOffsets,
    pub out_w: usize,
    pub out_b: usize,
    pub attention: Option<AttentionOffsets>,
    pub len: usize,
}

impl Layout {
    pub fn new(cfg: &ModelConfig) -> Self {
        let (i, h, e) = (cfg.input_dim, cfg.hidden_dim, cfg.embed_dim);
        let (enc_fwd, next) = GruOffsets::new(0, i, h);
        let (enc_bwd, next) = GruOffsets::new(next, i, h);
        let ctx_w = next;
        let ctx_b = ctx_w + h * 2 * h;
        let embed = ctx_b + h;
        let (dec, next) = GruOffsets::new(embed + VOCAB_SIZE * e, e, h);
        let out_w = next;
        let out_b = out_w + VOCAB_SIZE * h;
        let mut len = out_b + VOCAB_SIZE;
        let attention = cfg.attention.then(|| {
            let att_w = len;
            let comb_w = att_w + h * 2 * h;
            let comb_b = comb_w + h * 2 * h;
            len = comb_b + h;
            AttentionOffsets { att_w, comb_w, comb_b }
        });
        Self {
            enc_fwd,
            enc_bwd,
            ctx_w,
            ctx_b,
            embed,
            dec,
            out_w,
            out_b,
            attention,
            len,
        }
    }

    /// Named tensors with shapes, in storage order.
    pub fn tensors(&self, cfg: &ModelConfig) -> Vec<(String, Vec<usize>, usize)> {
        let (i, h, e) = (cfg.input_dim, cfg.hidden_dim, cfg.embed_dim);
        let mut out = Vec::new();
        for (name, g, inp) in [("enc_fwd", &self.enc_fwd, i), ("enc_bwd", &self.enc_bwd, i)] {
            out.push((format!("{name}.w_x"), vec![3 * h, inp], g.w_x));
            out.push((format!("{name}.w_h"), vec![3 * h, h], g.w_h));
            out.push((format!("{name}.b_x"), vec![3 * h], g.b_x));
            out.push((format!("{name}.b_h"), vec![3 * h], g.b_h));
        }
        out.push(("ctx.w".into(), vec![h, 2 * h], self.ctx_w));
        out.push(("ctx.b".into(), vec![h], self.ctx_b));
        out.push(("embed".into(), vec![VOCAB_SIZE, e], self.embed));
        out.push(("dec.w_x".into(), vec![3 * h, e], self.dec.w_x));
        out.push(("dec.w_h".into(), vec![3 * h, h], self.dec.w_h));
        out.push(("dec.b_x".into(), vec![3 * h], self.dec.b_x));
        out.push(("dec.b_h".into(), vec![3 * h], self.dec.b_h));
        out.push(("out.w".into(), vec![VOCAB_SIZE, h], self.out_w));
        out.push(("out.b".into(), vec![VOCAB_SIZE], self.out_b));
        if let Some(a) = &self.attention {
            out.push(("att.w".into(), vec![h, 2 * h], a.att_w));
            out.push(("comb.w".into(), vec![h, 2 * h], a.comb_w));
            out.push(("comb.b".into(), vec![h], a.comb_b));
        }
        out
    }
}

/// All weights of the encoder-decoder in one flat vector; [`Layout`] names
/// the slices.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub layout: Layout,
    pub data: Vec<f64>,
}

impl ModelParams {
    pub fn zeros(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(config);
        Ok(Self {
            config: config.clone(),
            data: vec![0.0; layout.len],
            layout,
        })
    }

    /// Uniform in `[-1/sqrt(hidden), 1/sqrt(hidden)]`.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        let mut p = Self::zeros(config)?;
        let bound = 1.0 / (config.hidden_dim as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in &mut p.data {
            *v = rng.gen_range(-bound..=bound);
        }
        Ok(p)
    }

    pub fn from_data(config: &ModelConfig, data: Vec<f64>) -> Result<Self> {
        let mut p = Self::zeros(config)?;
        if data.len() != p.data.len() {
            return Err(ModelError::Shape(format!(
                "parameter vector has {} values, config needs {}",
                data.len(),
                p.data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite("parameters".into()));
        }
        p.data = data;
        Ok(p)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn tensor(&self, name: &str) -> Option<&[f64]> {
        self.layout
            .tensors(&self.config)
            .into_iter()
            .find(|(n, _, _)| n == name)
            .map(|(_, shape, off)| &self.data[off..off + shape.iter().product::<usize>()])
    }

    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let found = self
            .layout
            .tensors(&self.config)
            .into_iter()
            .find(|(n, _, _)| n == name);
        found.map(move |(_, shape, off)| &mut self.data[off..off + shape.iter().product::<usize>()])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_covers_every_parameter_once() {
        let cfg = ModelConfig {
            input_dim: 5,
            hidden_dim: 3,
            embed_dim: 2,
            ..ModelConfig::default()
        };
        let layout = Layout::new(&cfg);
        let mut covered = vec![0u8; layout.len];
        for (_, shape, off) in layout.tensors(&cfg) {
            for c in &mut covered[off..off + shape.iter().product::<usize>()] {
                *c += 1;
            }
        }
        assert!(covered.iter().all(|c| *c == 1));
        let h = 3;
        let expected = 2 * (3 * h * 5 + 3 * h * h + 6 * h)
            + (h * 2 * h + h)
            + VOCAB_SIZE * 2
            + (3 * h * 2 + 3 * h * h + 6 * h)
            + (VOCAB_SIZE * h + VOCAB_SIZE);
        assert_eq!(layout.len, expected);

        let att = ModelConfig { attention: true, ..cfg.clone() };
        let layout = Layout::new(&att);
        let mut covered = vec![0u8; layout.len];
        for (_, shape, off) in layout.tensors(&att) {
            for c in &mut covered[off..off + shape.iter().product::<usize>()] {
                *c += 1;
            }
        }
        assert!(covered.iter().all(|c| *c == 1));
        assert_eq!(layout.len, expected + 2 * (h * 2 * h) + h);
    }

    #[test]
    fn init_is_bounded_and_seeded() {
        let cfg = ModelConfig {
            input_dim: 4,
            hidden_dim: 4,
            ..ModelConfig::default()
        };
        let a = ModelParams::init(&cfg, 3).unwrap();
        assert!(a.data.iter().all(|v| v.abs() <= 0.5));
        assert_eq!(a, ModelParams::init(&cfg, 3).unwrap());
        assert_ne!(a, ModelParams::init(&cfg, 4).unwrap());
    }
}
