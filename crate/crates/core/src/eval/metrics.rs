use serde::{Deserialize, Serialize};

use super::align::{align, AlignmentOp};
use super::{EvalError, Result};
use crate::dataset::PrimitiveClass;

const K: usize = PrimitiveClass::COUNT;

/// Per-class outcome counts of one or more alignments.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeTallies {
    pub tp: [u64; K],
    pub deletion: [u64; K],
    pub swap_out: [u64; K],
    pub insertion: [u64; K],
    pub swap_in: [u64; K],
    /// `substitutions[gt][pred]`
    pub substitutions: [[u64; K]; K],
}

impl OutcomeTallies {
    pub fn add(&mut self, other: &OutcomeTallies) {
        for c in 0..K {
            self.tp[c] += other.tp[c];
            self.deletion[c] += other.deletion[c];
            self.swap_out[c] += other.swap_out[c];
            self.insertion[c] += other.insertion[c];
            self.swap_in[c] += other.swap_in[c];
            for p in 0..K {
                self.substitutions[c][p] += other.substitutions[c][p];
            }
        }
    }

    pub fn false_negatives(&self, c: PrimitiveClass) -> u64 {
        self.deletion[c.code()] + self.swap_out[c.code()]
    }

    pub fn false_positives(&self, c: PrimitiveClass) -> u64 {
        self.insertion[c.code()] + self.swap_in[c.code()]
    }

    pub fn total_tp(&self) -> u64 {
        self.tp.iter().sum()
    }

    pub fn total_fn(&self) -> u64 {
        self.deletion.iter().chain(&self.swap_out).sum()
    }

    pub fn total_fp(&self) -> u64 {
        self.insertion.iter().chain(&self.swap_in).sum()
    }

    pub fn total_substitutions(&self) -> u64 {
        self.substitutions.iter().flatten().sum()
    }

    /// Levenshtein distance summed over the tallied alignments.
    pub fn distance(&self) -> u64 {
        self.deletion.iter().chain(&self.insertion).sum::<u64>() + self.total_substitutions()
    }

    pub fn gt_len(&self) -> u64 {
        self.total_tp() + self.total_fn()
    }

    pub fn pred_len(&self) -> u64 {
        self.total_tp() + self.total_fp()
    }

    pub fn gt_count(&self, c: PrimitiveClass) -> u64 {
        self.tp[c.code()] + self.false_negatives(c)
    }
}

pub fn tally(ops: &[AlignmentOp]) -> OutcomeTallies {
    let mut t = OutcomeTallies::default();
    for op in ops {
        match *op {
            AlignmentOp::Match { class } => t.tp[class.code()] += 1,
            AlignmentOp::Deletion { gt } => t.deletion[gt.code()] += 1,
            AlignmentOp::Insertion { pred } => t.insertion[pred.code()] += 1,
            AlignmentOp::Substitution { gt, pred } => {
                t.swap_out[gt.code()] += 1;
                t.swap_in[pred.code()] += 1;
                t.substitutions[gt.code()][pred.code()] += 1;
            }
        }
    }
    t
}

/// `None` marks a value whose denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub tp: u64,
    pub false_negatives: u64,
    pub false_positives: u64,
    pub sensitivity: Option<f64>,
    pub fdr: Option<f64>,
    pub f1: Option<f64>,
    pub aer: Option<f64>,
}

impl Metrics {
    /// `distance` is `None` where AER does not apply (per-class rows).
    pub fn from_counts(tp: u64, fneg: u64, fpos: u64, distance: Option<u64>) -> Self {
        let ratio = |num: u64, den: u64| (den > 0).then(|| num as f64 / den as f64);
        Metrics {
            tp,
            false_negatives: fneg,
            false_positives: fpos,
            sensitivity: ratio(tp, tp + fneg),
            fdr: ratio(fpos, tp + fpos),
            f1: ratio(2 * tp, 2 * tp + fneg + fpos),
            aer: distance.and_then(|d| ratio(d, tp + fneg)),
        }
    }

    pub fn from_tallies(t: &OutcomeTallies) -> Self {
        Self::from_counts(t.total_tp(), t.total_fn(), t.total_fp(), Some(t.distance()))
    }

    pub fn for_class(t: &OutcomeTallies, c: PrimitiveClass) -> Self {
        Self::from_counts(t.tp[c.code()], t.false_negatives(c), t.false_positives(c), None)
    }
}

pub fn metrics(gt: &[PrimitiveClass], pred: &[PrimitiveClass]) -> Metrics {
    Metrics::from_tallies(&tally(&align(gt, pred)))
}

/// F1 from sensitivity and false discovery rate, i.e. the harmonic mean of
/// sensitivity and precision `1 - fdr`.
pub fn f1_from_rates(sensitivity: f64, fdr: f64) -> f64 {
    let precision = 1.0 - fdr;
    if sensitivity + precision == 0.0 {
        return 0.0;
    }
    2.0 * sensitivity * precision / (sensitivity + precision)
}

/// Rows are ground-truth classes, columns predicted classes, both normalized
/// by the row's ground-truth count. Rows without ground truth are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub rows: Vec<Option<[f64; K]>>,
    pub deletion_fraction: Vec<Option<f64>>,
}

pub fn confusion_matrix(t: &OutcomeTallies) -> ConfusionMatrix {
    let mut rows = Vec::with_capacity(K);
    let mut deletion_fraction = Vec::with_capacity(K);
    for c in PrimitiveClass::ALL {
        let r = c.code();
        let n = t.gt_count(c);
        if n == 0 {
            rows.push(None);
            deletion_fraction.push(None);
            continue;
        }
        let n = n as f64;
        let mut row = [0.0; K];
        for (p, v) in row.iter_mut().enumerate() {
            *v = if p == r { t.tp[r] as f64 / n } else { t.substitutions[r][p] as f64 / n };
        }
        rows.push(Some(row));
        deletion_fraction.push(Some(t.deletion[r] as f64 / n));
    }
    ConfusionMatrix { rows, deletion_fraction }
}

fn mid_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        // ranks are 1-based; ties share the mean of their positions
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman correlation as the Pearson correlation of mid-ranks. `Ok(None)`
/// when either rank vector has zero variance.
pub fn spearman_rho(xs: &[f64], ys: &[f64]) -> Result<Option<f64>> {
    if xs.len() != ys.len() {
        return Err(EvalError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(EvalError::TooFewPoints(xs.len()));
    }
    if let Some(i) = xs.iter().chain(ys).position(|v| !v.is_finite()) {
        return Err(EvalError::NonFinite(i % xs.len()));
    }
    let (rx, ry) = (mid_ranks(xs), mid_ranks(ys));
    let n = xs.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(None);
    }
    Ok(Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)))
}
