use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{BaselineError, Result};
use crate::dataset::PrimitiveClass;
use crate::model::{softmax, Adam};

const K: usize = PrimitiveClass::COUNT;

/// Maps one frame's feature vector to class probabilities.
pub trait PointwiseClassifier {
    fn feature_dim(&self) -> usize;
    fn predict_proba(&self, features: &[f64]) -> [f64; K];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PointwiseConfig {
    pub context_frames: usize,
    /// Every `frame_step`-th frame is a training sample.
    pub frame_step: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for PointwiseConfig {
    fn default() -> Self {
        Self {
            context_frames: super::DEFAULT_CONTEXT_FRAMES,
            frame_step: 10,
            learning_rate: 0.01,
            epochs: 30,
            batch_size: 64,
            seed: 0,
        }
    }
}

/// Multinomial logistic regression on standardized features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticRegression {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// `K x dim`, row-major.
    pub weights: Vec<f64>,
    pub bias: [f64; K],
}

impl LogisticRegression {
    /// All-zero weights with identity standardization.
    pub fn zeros(dim: usize) -> Self {
        Self { mean: vec![0.0; dim], std: vec![1.0; dim], weights: vec![0.0; K * dim], bias: [0.0; K] }
    }

    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn standardize(&self, features: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(features.iter().zip(&self.mean).zip(&self.std).map(|((x, m), s)| (x - m) / s));
    }

    fn probs_standardized(&self, x: &[f64]) -> [f64; K] {
        let d = self.dim();
        let logits: Vec<f64> = (0..K)
            .map(|k| self.bias[k] + self.weights[k * d..(k + 1) * d].iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
            .collect();
        let p = softmax(&logits);
        [p[0], p[1], p[2], p[3], p[4]]
    }

    /// Mean negative log-likelihood of the labels.
    pub fn cross_entropy(&self, features: &[Vec<f64>], labels: &[PrimitiveClass]) -> f64 {
        let total: f64 = features
            .iter()
            .zip(labels)
            .map(|(f, l)| -self.predict_proba(f)[l.code()].ln())
            .sum();
        total / features.len() as f64
    }

    pub fn accuracy(&self, features: &[Vec<f64>], labels: &[PrimitiveClass]) -> f64 {
        let hits = features
            .iter()
            .zip(labels)
            .filter(|(f, l)| argmax_class(&self.predict_proba(f)) == l.code())
            .count();
        hits as f64 / features.len() as f64
    }
}

impl PointwiseClassifier for LogisticRegression {
    fn feature_dim(&self) -> usize {
        self.dim()
    }

    fn predict_proba(&self, features: &[f64]) -> [f64; K] {
        let mut x = Vec::with_capacity(self.dim());
        self.standardize(features, &mut x);
        self.probs_standardized(&x)
    }
}

/// Index of the largest value, lowest index on ties.
pub fn argmax_class(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in p.iter().enumerate() {
        if *v > p[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub epoch_loss: Vec<f64>,
    pub train_accuracy: f64,
}

/// Fits the classifier with mini-batch Adam on the mean cross-entropy.
pub fn train_pointwise(
    features: &[Vec<f64>],
    labels: &[PrimitiveClass],
    cfg: &PointwiseConfig,
) -> Result<(LogisticRegression, TrainingReport)> {
    if features.is_empty() || features.len() != labels.len() {
        return Err(BaselineError::NoSamples);
    }
    if cfg.batch_size == 0 || !(cfg.learning_rate > 0.0) {
        return Err(BaselineError::Config("batch_size and learning_rate must be positive".into()));
    }
    let dim = features[0].len();
    if let Some(f) = features.iter().find(|f| f.len() != dim) {
        return Err(BaselineError::Dimension { expected: dim, found: f.len() });
    }

    let n = features.len() as f64;
    let mut model = LogisticRegression::zeros(dim);
    for f in features {
        for (m, v) in model.mean.iter_mut().zip(f) {
            *m += v / n;
        }
    }
    let mut var = vec![0.0; dim];
    for f in features {
        for ((s, v), m) in var.iter_mut().zip(f).zip(&model.mean) {
            *s += (v - m) * (v - m) / n;
        }
    }
    model.std = var.iter().map(|v| if v.sqrt() > 1e-8 { v.sqrt() } else { 1.0 }).collect();
    let mut standardized = Vec::with_capacity(features.len());
    for f in features {
        let mut x = Vec::new();
        model.standardize(f, &mut x);
        standardized.push(x);
    }

    let n_params = K * dim + K;
    let mut adam = Adam::new(n_params, cfg.learning_rate, 0.9, 0.999, 1e-8);
    let mut params = vec![0.0; n_params];
    let mut grad = vec![0.0; n_params];
    let mut order: Vec<usize> = (0..features.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut epoch_loss = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let x = &standardized[i];
                let p = model.probs_standardized(x);
                let y = labels[i].code();
                loss -= p[y].ln();
                for k in 0..K {
                    let d = (p[k] - if k == y { 1.0 } else { 0.0 }) * scale;
                    for (g, v) in grad[k * dim..(k + 1) * dim].iter_mut().zip(x) {
                        *g += d * v;
                    }
                    grad[K * dim + k] += d;
                }
            }
            adam.step(&mut params, &grad);
            model.weights.copy_from_slice(&params[..K * dim]);
            model.bias.copy_from_slice(&params[K * dim..]);
        }
        let loss = loss / n;
        if !loss.is_finite() {
            return Err(BaselineError::Diverged(epoch + 1));
        }
        epoch_loss.push(loss);
    }
    let train_accuracy = model.accuracy(features, labels);
    Ok((model, TrainingReport { epoch_loss, train_accuracy }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    fn separable(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<PrimitiveClass>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.3).unwrap();
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for _ in 0..n {
            let c = rng.gen_range(0..K);
            // class c sits at +3 on axis c
            let x: Vec<f64> = (0..6).map(|j| if j == c { 3.0 } else { 0.0 } + noise.sample(&mut rng)).collect();
            xs.push(x);
            ys.push(PrimitiveClass::from_code(c).unwrap());
        }
        (xs, ys)
    }

    #[test]
    fn separable_data_is_learned() {
        let (xs, ys) = separable(2000, 1);
        let (model, report) = train_pointwise(&xs, &ys, &PointwiseConfig { epochs: 10, ..Default::default() }).unwrap();
        assert!(report.train_accuracy > 0.99, "{}", report.train_accuracy);
        assert!(report.epoch_loss.last().unwrap() < &report.epoch_loss[0]);
        let (tx, ty) = separable(500, 2);
        assert!(model.accuracy(&tx, &ty) > 0.99);
    }

    #[test]
    fn zero_weights_are_uniform() {
        let (xs, ys) = separable(50, 3);
        let model = LogisticRegression::zeros(6);
        assert_eq!(model.predict_proba(&xs[0]), [0.2; K]);
        assert!((model.cross_entropy(&xs, &ys) - 5f64.ln()).abs() < 1e-12);
        assert!((5f64.ln() - 1.6094).abs() < 1e-4);
    }

    #[test]
    fn training_is_seeded() {
        let (xs, ys) = separable(300, 4);
        let cfg = PointwiseConfig { epochs: 3, seed: 9, ..Default::default() };
        let a = train_pointwise(&xs, &ys, &cfg).unwrap();
        let b = train_pointwise(&xs, &ys, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(train_pointwise(&[], &[], &PointwiseConfig::default()).is_err());
        let xs = vec![vec![1.0, 2.0], vec![1.0]];
        let ys = vec![PrimitiveClass::Reach; 2];
        assert!(matches!(
            train_pointwise(&xs, &ys, &PointwiseConfig::default()),
            Err(BaselineError::Dimension { .. })
        ));
    }
}
