use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::metrics::{Metrics, OutcomeTallies};
use super::{EvalError, Result};
use crate::dataset::PrimitiveClass;

/// Tallies of one scored unit (a window or a session) with its labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledTallies {
    pub subject: String,
    pub activity: String,
    pub tallies: OutcomeTallies,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupBy {
    PrimitiveClass,
    Activity,
    Subject,
    Overall,
}

/// Sample mean and standard deviation; `std` is `None` for a single value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: Option<f64>,
    pub n: usize,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = (n > 1).then(|| {
            let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
            (ss / (n - 1) as f64).sqrt()
        });
        Some(MeanStd { mean, std, n })
    }
}

/// Per-subject metric values summarized across subjects. Subjects where a
/// metric is undefined are left out of that metric's summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubjectSpread {
    pub sensitivity: Option<MeanStd>,
    pub fdr: Option<MeanStd>,
    pub f1: Option<MeanStd>,
    pub aer: Option<MeanStd>,
}

impl SubjectSpread {
    fn of(per_subject: &[Metrics]) -> Self {
        let pick = |f: fn(&Metrics) -> Option<f64>| {
            let v: Vec<f64> = per_subject.iter().filter_map(f).collect();
            MeanStd::of(&v)
        };
        SubjectSpread {
            sensitivity: pick(|m| m.sensitivity),
            fdr: pick(|m| m.fdr),
            f1: pick(|m| m.f1),
            aer: pick(|m| m.aer),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMetrics {
    pub group_by: GroupBy,
    pub key: String,
    /// Metrics of the summed tallies.
    pub metrics: Metrics,
    pub n_subjects: usize,
    /// Absent when grouping by subject.
    pub across_subjects: Option<SubjectSpread>,
}

fn pool<'a>(items: impl Iterator<Item = &'a LabeledTallies>) -> OutcomeTallies {
    let mut t = OutcomeTallies::default();
    for item in items {
        t.add(&item.tallies);
    }
    t
}

fn by_subject<'a>(items: &[&'a LabeledTallies]) -> BTreeMap<&'a str, OutcomeTallies> {
    let mut out: BTreeMap<&str, OutcomeTallies> = BTreeMap::new();
    for item in items {
        out.entry(item.subject.as_str()).or_default().add(&item.tallies);
    }
    out
}

fn group_row(
    by: GroupBy,
    key: String,
    items: &[&LabeledTallies],
    score: impl Fn(&OutcomeTallies) -> Metrics,
) -> GroupMetrics {
    let pooled = pool(items.iter().copied());
    let subjects = by_subject(items);
    let across_subjects = (by != GroupBy::Subject).then(|| {
        let per: Vec<Metrics> = subjects.values().map(&score).collect();
        SubjectSpread::of(&per)
    });
    GroupMetrics { group_by: by, key, metrics: score(&pooled), n_subjects: subjects.len(), across_subjects }
}

/// Sums tallies within each group before computing metrics, and reports the
/// per-subject spread next to the pooled values. Rows are sorted by key,
/// except class rows which follow class code order.
pub fn aggregate(items: &[LabeledTallies], by: GroupBy) -> Result<Vec<GroupMetrics>> {
    if items.is_empty() {
        return Err(EvalError::EmptyGroup(format!("{by:?}")));
    }
    let all: Vec<&LabeledTallies> = items.iter().collect();
    let rows = match by {
        GroupBy::Overall => vec![group_row(by, "overall".into(), &all, Metrics::from_tallies)],
        GroupBy::PrimitiveClass => PrimitiveClass::ALL
            .iter()
            .map(|&c| group_row(by, c.name().into(), &all, move |t| Metrics::for_class(t, c)))
            .collect(),
        GroupBy::Activity | GroupBy::Subject => {
            let mut groups: BTreeMap<&str, Vec<&LabeledTallies>> = BTreeMap::new();
            for item in items {
                let key = if by == GroupBy::Activity { &item.activity } else { &item.subject };
                groups.entry(key.as_str()).or_default().push(item);
            }
            groups
                .into_iter()
                .map(|(key, members)| group_row(by, key.to_string(), &members, Metrics::from_tallies))
                .collect()
        }
    };
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::PrimitiveClass::*;
    use crate::eval::{align, tally};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn item(subject: &str, activity: &str, tp: u64, fneg: u64) -> LabeledTallies {
        let mut t = OutcomeTallies::default();
        t.tp[Reach.code()] = tp;
        t.deletion[Reach.code()] = fneg;
        LabeledTallies { subject: subject.into(), activity: activity.into(), tallies: t }
    }

    #[test]
    fn micro_and_per_subject_means_are_both_reported() {
        let items = [item("a", "shelf", 1, 1), item("b", "shelf", 3, 1)];
        let rows = aggregate(&items, GroupBy::Overall).unwrap();
        assert_eq!(rows.len(), 1);
        let sens = rows[0].metrics.sensitivity.unwrap();
        assert!((sens - 4.0 / 6.0).abs() < 1e-15);
        let spread = rows[0].across_subjects.unwrap().sensitivity.unwrap();
        assert!((spread.mean - 0.625).abs() < 1e-15);
        assert_eq!(spread.n, 2);
    }

    #[test]
    fn single_subject_single_activity_equals_pooled() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let items: Vec<LabeledTallies> = (0..20)
            .map(|_| {
                let gt: Vec<_> = (0..rng.gen_range(1..6)).map(|_| PrimitiveClass::from_code(rng.gen_range(0..5)).unwrap()).collect();
                let pred: Vec<_> = (0..rng.gen_range(0..6)).map(|_| PrimitiveClass::from_code(rng.gen_range(0..5)).unwrap()).collect();
                LabeledTallies { subject: "s".into(), activity: "x".into(), tallies: tally(&align(&gt, &pred)) }
            })
            .collect();
        let mut pooled = OutcomeTallies::default();
        for i in &items {
            pooled.add(&i.tallies);
        }
        let want = Metrics::from_tallies(&pooled);
        for by in [GroupBy::Overall, GroupBy::Activity, GroupBy::Subject] {
            let rows = aggregate(&items, by).unwrap();
            assert_eq!(rows.len(), 1);
            assert_eq!(rows[0].metrics, want);
        }
    }

    #[test]
    fn activity_grouping_matches_manual_partition() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let acts = ["shelf", "tabletop", "feeding"];
        let items: Vec<LabeledTallies> = (0..60)
            .map(|i| {
                let gt: Vec<_> = (0..rng.gen_range(1..8)).map(|_| PrimitiveClass::from_code(rng.gen_range(0..5)).unwrap()).collect();
                let pred: Vec<_> = (0..rng.gen_range(0..8)).map(|_| PrimitiveClass::from_code(rng.gen_range(0..5)).unwrap()).collect();
                LabeledTallies {
                    subject: format!("s{}", i % 4),
                    activity: acts[rng.gen_range(0..3)].into(),
                    tallies: tally(&align(&gt, &pred)),
                }
            })
            .collect();
        let rows = aggregate(&items, GroupBy::Activity).unwrap();
        let mut keys: Vec<&str> = acts.to_vec();
        keys.sort();
        assert_eq!(rows.iter().map(|r| r.key.as_str()).collect::<Vec<_>>(), keys);
        for row in &rows {
            let (mut tp, mut fneg, mut fpos, mut dist) = (0, 0, 0, 0);
            for i in items.iter().filter(|i| i.activity == row.key) {
                tp += i.tallies.total_tp();
                fneg += i.tallies.total_fn();
                fpos += i.tallies.total_fp();
                dist += i.tallies.distance();
            }
            assert_eq!(row.metrics, Metrics::from_counts(tp, fneg, fpos, Some(dist)));
        }
    }

    #[test]
    fn class_rows_use_class_outcomes() {
        let items = [LabeledTallies {
            subject: "s".into(),
            activity: "a".into(),
            tallies: tally(&align(&[Reach, Transport, Idle], &[Reach, Idle, Idle])),
        }];
        let rows = aggregate(&items, GroupBy::PrimitiveClass).unwrap();
        assert_eq!(rows.len(), 5);
        let transport = &rows[Transport.code()];
        assert_eq!(transport.metrics.sensitivity, Some(0.0));
        assert_eq!(transport.metrics.fdr, None);
        let idle = &rows[Idle.code()];
        assert_eq!(idle.metrics.sensitivity, Some(1.0));
        assert_eq!(idle.metrics.fdr, Some(0.5));
        assert!(rows.iter().all(|r| r.metrics.aer.is_none()));
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(aggregate(&[], GroupBy::Overall).is_err());
    }

    #[test]
    fn sample_std() {
        let m = MeanStd::of(&[0.5, 0.75]).unwrap();
        assert!((m.std.unwrap() - (0.03125f64).sqrt()).abs() < 1e-15);
        assert_eq!(MeanStd::of(&[1.0]).unwrap().std, None);
        assert!(MeanStd::of(&[]).is_none());
    }
}
