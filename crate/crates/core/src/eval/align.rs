use serde::{Deserialize, Serialize};

use crate::dataset::PrimitiveClass;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum AlignmentOp {
    Match { class: PrimitiveClass },
    Substitution { gt: PrimitiveClass, pred: PrimitiveClass },
    Deletion { gt: PrimitiveClass },
    Insertion { pred: PrimitiveClass },
}

impl AlignmentOp {
    pub fn cost(self) -> usize {
        match self {
            AlignmentOp::Match { .. } => 0,
            _ => 1,
        }
    }

    pub fn gt(self) -> Option<PrimitiveClass> {
        match self {
            AlignmentOp::Match { class } => Some(class),
            AlignmentOp::Substitution { gt, .. } | AlignmentOp::Deletion { gt } => Some(gt),
            AlignmentOp::Insertion { .. } => None,
        }
    }

    pub fn pred(self) -> Option<PrimitiveClass> {
        match self {
            AlignmentOp::Match { class } => Some(class),
            AlignmentOp::Substitution { pred, .. } | AlignmentOp::Insertion { pred } => Some(pred),
            AlignmentOp::Deletion { .. } => None,
        }
    }
}

/// Unit-cost edit distance with two rolling rows.
pub fn levenshtein(gt: &[PrimitiveClass], pred: &[PrimitiveClass]) -> usize {
    let mut prev: Vec<usize> = (0..=pred.len()).collect();
    let mut cur = vec![0; pred.len() + 1];
    for (i, g) in gt.iter().enumerate() {
        cur[0] = i + 1;
        for (j, p) in pred.iter().enumerate() {
            let sub = prev[j] + usize::from(g != p);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[pred.len()]
}

/// Minimal-cost alignment of `pred` against `gt`.
///
/// The backtrace runs from the end of both sequences and, among optimal
/// moves, prefers match, then substitution, then deletion, then insertion.
pub fn align(gt: &[PrimitiveClass], pred: &[PrimitiveClass]) -> Vec<AlignmentOp> {
    let (n, m) = (gt.len(), pred.len());
    let w = m + 1;
    let mut d = vec![0usize; (n + 1) * w];
    for j in 0..=m {
        d[j] = j;
    }
    for i in 1..=n {
        d[i * w] = i;
        for j in 1..=m {
            let sub = d[(i - 1) * w + j - 1] + usize::from(gt[i - 1] != pred[j - 1]);
            d[i * w + j] = sub.min(d[(i - 1) * w + j] + 1).min(d[i * w + j - 1] + 1);
        }
    }

    let mut ops = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = d[i * w + j];
        if i > 0 && j > 0 {
            let diag = d[(i - 1) * w + j - 1];
            if gt[i - 1] == pred[j - 1] && diag == here {
                ops.push(AlignmentOp::Match { class: gt[i - 1] });
                i -= 1;
                j -= 1;
                continue;
            }
            if gt[i - 1] != pred[j - 1] && diag + 1 == here {
                ops.push(AlignmentOp::Substitution { gt: gt[i - 1], pred: pred[j - 1] });
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && d[(i - 1) * w + j] + 1 == here {
            ops.push(AlignmentOp::Deletion { gt: gt[i - 1] });
            i -= 1;
        } else {
            ops.push(AlignmentOp::Insertion { pred: pred[j - 1] });
            j -= 1;
        }
    }
    ops.reverse();
    ops
}

pub fn alignment_cost(ops: &[AlignmentOp]) -> usize {
    ops.iter().map(|op| op.cost()).sum()
}

pub fn project_gt(ops: &[AlignmentOp]) -> Vec<PrimitiveClass> {
    ops.iter().filter_map(|op| op.gt()).collect()
}

pub fn project_pred(ops: &[AlignmentOp]) -> Vec<PrimitiveClass> {
    ops.iter().filter_map(|op| op.pred()).collect()
}
