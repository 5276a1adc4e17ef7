use serde::{Deserialize, Serialize};

use super::{PreprocessError, Result};
use crate::dataset::ImuRecording;

/// Channels whose pooled std falls below this are treated as constant.
pub const MIN_STD: f64 = 1e-8;

/// Per-channel z-score parameters. `std` is always positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Identifier of the split the statistics were fitted on.
    pub source: String,
}

impl NormalizationStats {
    pub fn channel_count(&self) -> usize {
        self.mean.len()
    }

    /// Identity transform for `channels` channels.
    pub fn identity(channels: usize) -> Self {
        Self {
            mean: vec![0.0; channels],
            std: vec![1.0; channels],
            source: "identity".into(),
        }
    }

    /// Normalizes a row-major buffer of whole frames in place.
    pub fn normalize_in_place(&self, data: &mut [f64]) -> Result<()> {
        let ch = self.channel_count();
        if ch == 0 || data.len() % ch != 0 {
            return Err(PreprocessError::ChannelMismatch {
                expected: ch,
                found: data.len() % ch.max(1),
            });
        }
        for frame in data.chunks_exact_mut(ch) {
            for ((v, m), s) in frame.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - m) / s;
            }
        }
        Ok(())
    }

    fn check(&self, rec: &ImuRecording) -> Result<()> {
        if rec.channel_count() != self.channel_count() {
            return Err(PreprocessError::ChannelMismatch {
                expected: self.channel_count(),
                found: rec.channel_count(),
            });
        }
        Ok(())
    }
}

/// Pooled per-channel mean and population std over every frame of every
/// recording (Welford accumulation).
pub fn fit_normalization<'a, I>(recordings: I, source: &str) -> Result<NormalizationStats>
where
    I: IntoIterator<Item = &'a ImuRecording>,
{
    let mut iter = recordings.into_iter().peekable();
    let ch = match iter.peek() {
        Some(r) => r.channel_count(),
        None => return Err(PreprocessError::EmptyInput),
    };
    let mut count = 0u64;
    let mut mean = vec![0.0; ch];
    let mut m2 = vec![0.0; ch];
    for rec in iter {
        if rec.channel_count() != ch {
            return Err(PreprocessError::ChannelMismatch {
                expected: ch,
                found: rec.channel_count(),
            });
        }
        for frame in rec.frames() {
            count += 1;
            let n = count as f64;
            for c in 0..ch {
                let delta = frame[c] - mean[c];
                mean[c] += delta / n;
                m2[c] += delta * (frame[c] - mean[c]);
            }
        }
    }
    if count == 0 {
        return Err(PreprocessError::EmptyInput);
    }
    let std = m2
        .iter()
        .map(|v| {
            let s = (v / count as f64).sqrt();
            if s < MIN_STD {
                1.0
            } else {
                s
            }
        })
        .collect();
    Ok(NormalizationStats {
        mean,
        std,
        source: source.to_string(),
    })
}

pub fn apply_normalization(recording: &ImuRecording, stats: &NormalizationStats) -> Result<ImuRecording> {
    stats.check(recording)?;
    let mut data = recording.data().to_vec();
    stats.normalize_in_place(&mut data)?;
    Ok(recording.with_data(data)?)
}

pub fn invert_normalization(recording: &ImuRecording, stats: &NormalizationStats) -> Result<ImuRecording> {
    stats.check(recording)?;
    let ch = stats.channel_count();
    let mut data = recording.data().to_vec();
    for frame in data.chunks_exact_mut(ch) {
        for ((v, m), s) in frame.iter_mut().zip(&stats.mean).zip(&stats.std) {
            *v = *v * s + m;
        }
    }
    Ok(recording.with_data(data)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rec(ch: usize, data: Vec<f64>) -> ImuRecording {
        ImuRecording::new("s", "a", 1, 100.0, ch, data).unwrap()
    }

    fn random_recs(seed: u64) -> Vec<ImuRecording> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..3)
            .map(|i| {
                let n = 50 + 17 * i;
                rec(4, (0..n * 4).map(|j| rng.gen::<f64>() * 3.0 + (j % 4) as f64).collect())
            })
            .collect()
    }

    #[test]
    fn constant_channel_gets_unit_std() {
        let stats = fit_normalization([&rec(2, vec![3.0, -1.0, 3.0, -1.0, 3.0, -1.0])], "train").unwrap();
        assert_eq!(stats.mean, vec![3.0, -1.0]);
        assert_eq!(stats.std, vec![1.0, 1.0]);
    }

    #[test]
    fn plus_minus_one() {
        let stats = fit_normalization([&rec(1, vec![-1.0, 1.0, -1.0, 1.0])], "train").unwrap();
        assert!(stats.mean[0].abs() < 1e-15);
        assert!((stats.std[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn matches_two_pass_oracle() {
        let recs = random_recs(3);
        let stats = fit_normalization(&recs, "train").unwrap();
        for c in 0..4 {
            let values: Vec<f64> = recs.iter().flat_map(|r| r.frames().map(move |f| f[c])).collect();
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            assert!((stats.mean[c] - mean).abs() < 1e-12);
            assert!((stats.std[c] - var.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn normalized_train_set_has_zero_mean_unit_variance() {
        let recs = random_recs(8);
        let stats = fit_normalization(&recs, "train").unwrap();
        let normed: Vec<_> = recs.iter().map(|r| apply_normalization(r, &stats).unwrap()).collect();
        let again = fit_normalization(&normed, "check").unwrap();
        for c in 0..4 {
            assert!(again.mean[c].abs() < 1e-6);
            assert!((again.std[c] - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn mean_maps_to_zero_and_inverse_recovers() {
        let stats = NormalizationStats {
            mean: vec![2.0, -1.0],
            std: vec![0.5, 4.0],
            source: "x".into(),
        };
        let r = rec(2, vec![2.0, -1.0, 2.5, 3.0, 7.25, -0.125]);
        let n = apply_normalization(&r, &stats).unwrap();
        assert_eq!(&n.frame(0), &[0.0, 0.0]);
        assert_eq!(&n.frame(1), &[1.0, 1.0]);
        let back = invert_normalization(&n, &stats).unwrap();
        for (a, b) in back.data().iter().zip(r.data()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn errors() {
        let none: Vec<ImuRecording> = vec![];
        assert!(matches!(fit_normalization(&none, "x"), Err(PreprocessError::EmptyInput)));
        let stats = NormalizationStats::identity(3);
        assert!(matches!(
            apply_normalization(&rec(2, vec![0.0; 4]), &stats),
            Err(PreprocessError::ChannelMismatch { expected: 3, found: 2 })
        ));
    }
}
