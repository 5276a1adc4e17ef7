use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DatasetError, Result};

/// Subject-level partition for one cross-validation fold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train_subjects: BTreeSet<String>,
    pub val_subjects: BTreeSet<String>,
    pub test_subjects: BTreeSet<String>,
}

impl DatasetSplit {
    pub fn new(
        train_subjects: BTreeSet<String>,
        val_subjects: BTreeSet<String>,
        test_subjects: BTreeSet<String>,
    ) -> Result<Self> {
        let split = Self {
            train_subjects,
            val_subjects,
            test_subjects,
        };
        split.check_disjoint()?;
        Ok(split)
    }

    fn check_disjoint(&self) -> Result<()> {
        let pairs = [
            ("train", &self.train_subjects, "val", &self.val_subjects),
            ("train", &self.train_subjects, "test", &self.test_subjects),
            ("val", &self.val_subjects, "test", &self.test_subjects),
        ];
        for (an, a, bn, b) in pairs {
            if let Some(s) = a.intersection(b).next() {
                return Err(DatasetError::InvalidSplit(format!(
                    "subject {s:?} is in both {an} and {bn}"
                )));
            }
        }
        Ok(())
    }

    /// Checks disjointness and that every listed subject is known.
    pub fn validate(&self, known: &BTreeSet<String>) -> Result<()> {
        self.check_disjoint()?;
        for s in self
            .train_subjects
            .iter()
            .chain(&self.val_subjects)
            .chain(&self.test_subjects)
        {
            if !known.contains(s) {
                return Err(DatasetError::InvalidSplit(format!("unknown subject {s:?}")));
            }
        }
        Ok(())
    }

    pub fn with_test(mut self, test: BTreeSet<String>) -> Result<Self> {
        self.test_subjects = test;
        self.check_disjoint()?;
        Ok(self)
    }
}

fn shuffled(subjects: &[String], seed: u64) -> Vec<String> {
    let mut sorted: Vec<String> = subjects.to_vec();
    sorted.sort();
    sorted.dedup();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sorted.shuffle(&mut rng);
    sorted
}

/// Assigns subjects round-robin (after a seeded shuffle) to `n_folds`
/// validation sets; each fold trains on everyone else.
pub fn split_subjects(subjects: &[String], n_folds: usize, seed: u64) -> Result<Vec<DatasetSplit>> {
    let order = shuffled(subjects, seed);
    if n_folds < 2 || order.len() < n_folds {
        return Err(DatasetError::TooFewSubjects {
            found: order.len(),
            folds: n_folds,
        });
    }
    let mut folds = Vec::with_capacity(n_folds);
    for fold in 0..n_folds {
        let mut train = BTreeSet::new();
        let mut val = BTreeSet::new();
        for (i, s) in order.iter().enumerate() {
            if i % n_folds == fold {
                val.insert(s.clone());
            } else {
                train.insert(s.clone());
            }
        }
        folds.push(DatasetSplit::new(train, val, BTreeSet::new())?);
    }
    Ok(folds)
}

/// Member splits for an ensemble of `n_folds`. A single member validates on
/// the first fold of a 4-way split (or fewer folds when there are fewer than
/// 4 subjects).
pub fn ensemble_splits(subjects: &[String], n_folds: usize, seed: u64) -> Result<Vec<DatasetSplit>> {
    if n_folds == 1 {
        let n = shuffled(subjects, seed).len();
        let mut folds = split_subjects(subjects, n.clamp(2, 4), seed)?;
        folds.truncate(1);
        return Ok(folds);
    }
    split_subjects(subjects, n_folds, seed)
}

/// Seeded hold-out of `n_test` subjects. Returns `(remaining, test)`.
pub fn holdout_subjects(
    subjects: &[String],
    n_test: usize,
    seed: u64,
) -> Result<(Vec<String>, BTreeSet<String>)> {
    let order = shuffled(subjects, seed);
    if n_test >= order.len() {
        return Err(DatasetError::TooFewSubjects {
            found: order.len(),
            folds: n_test + 1,
        });
    }
    let test: BTreeSet<String> = order[..n_test].iter().cloned().collect();
    let mut rest: Vec<String> = order[n_test..].to_vec();
    rest.sort();
    Ok((rest, test))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("s{i:02}")).collect()
    }

    #[test]
    fn single_member_split() {
        let folds = ensemble_splits(&ids(9), 1, 3).unwrap();
        assert_eq!(folds.len(), 1);
        assert_eq!(folds[0].val_subjects.len(), 3);
        assert_eq!(folds[0].train_subjects.len(), 6);
        assert_eq!(folds[0], split_subjects(&ids(9), 4, 3).unwrap()[0]);
        assert!(ensemble_splits(&ids(1), 1, 3).is_err());
    }

    #[test]
    fn thirty_three_subjects_four_folds() {
        let splits = split_subjects(&ids(33), 4, 11).unwrap();
        let mut sizes: Vec<usize> = splits.iter().map(|s| s.val_subjects.len()).collect();
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        assert_eq!(sizes, vec![9, 8, 8, 8]);
        for s in &splits {
            assert_eq!(s.train_subjects.len() + s.val_subjects.len(), 33);
            let n_train = s.train_subjects.len();
            assert!(n_train == 24 || n_train == 25);
        }
    }

    #[test]
    fn four_subjects_singleton_folds() {
        let splits = split_subjects(&ids(4), 4, 0).unwrap();
        assert!(splits.iter().all(|s| s.val_subjects.len() == 1));
    }

    #[test]
    fn validation_sets_partition_subjects() {
        let all: BTreeSet<String> = ids(17).into_iter().collect();
        let splits = split_subjects(&ids(17), 5, 3).unwrap();
        let mut union = BTreeSet::new();
        for (i, a) in splits.iter().enumerate() {
            a.validate(&all).unwrap();
            for b in &splits[i + 1..] {
                assert!(a.val_subjects.is_disjoint(&b.val_subjects));
            }
            union.extend(a.val_subjects.iter().cloned());
        }
        assert_eq!(union, all);
    }

    #[test]
    fn deterministic_given_seed() {
        assert_eq!(
            split_subjects(&ids(10), 3, 5).unwrap(),
            split_subjects(&ids(10), 3, 5).unwrap()
        );
    }

    #[test]
    fn too_few_subjects() {
        assert!(matches!(
            split_subjects(&ids(3), 4, 0),
            Err(DatasetError::TooFewSubjects { found: 3, folds: 4 })
        ));
        assert!(split_subjects(&ids(3), 1, 0).is_err());
    }

    #[test]
    fn overlapping_split_rejected() {
        let a: BTreeSet<String> = ["x".to_string()].into();
        assert!(DatasetSplit::new(a.clone(), a, BTreeSet::new()).is_err());
    }

    #[test]
    fn holdout_is_disjoint() {
        let (rest, test) = holdout_subjects(&ids(12), 3, 9).unwrap();
        assert_eq!(test.len(), 3);
        assert_eq!(rest.len(), 9);
        assert!(rest.iter().all(|s| !test.contains(s)));
    }
}
