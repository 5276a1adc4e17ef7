use std::io::{Read, Write};

use super::features::extract_features;
use super::kaiser::KaiserSmoother;
use super::logistic::{argmax_class, PointwiseClassifier};
use super::{BaselineError, Result};
use crate::dataset::{ImuRecording, PrimitiveClass};
use crate::decode::WindowPrediction;
use crate::preprocess::WindowOrigin;

const K: usize = PrimitiveClass::COUNT;

/// Per-frame class probabilities of one recording.
#[derive(Debug, Clone, PartialEq)]
pub struct PointwiseTrack {
    rows: Vec<[f64; K]>,
}

impl PointwiseTrack {
    pub fn new(rows: Vec<[f64; K]>) -> Result<Self> {
        for (i, r) in rows.iter().enumerate() {
            let sum: f64 = r.iter().sum();
            if (sum - 1.0).abs() > 1e-9 || r.iter().any(|v| !(*v >= 0.0)) {
                return Err(BaselineError::NotStochastic { row: i, sum });
            }
        }
        Ok(Self { rows })
    }

    pub fn from_classifier<C: PointwiseClassifier>(
        recording: &ImuRecording,
        classifier: &C,
        context_frames: usize,
    ) -> Result<Self> {
        let expected = classifier.feature_dim();
        let found = 5 * recording.channel_count();
        if expected != found {
            return Err(BaselineError::Dimension { expected, found });
        }
        let rows = (0..recording.n_frames())
            .map(|t| classifier.predict_proba(&extract_features(recording, t, context_frames).to_vec()))
            .collect();
        Self::new(rows)
    }

    pub fn rows(&self) -> &[[f64; K]] {
        &self.rows
    }

    pub fn n_frames(&self) -> usize {
        self.rows.len()
    }

    /// Most probable class per frame, lowest class code on ties.
    pub fn labels(&self) -> Vec<PrimitiveClass> {
        self.rows
            .iter()
            .map(|r| PrimitiveClass::from_code(argmax_class(r)).expect("class index"))
            .collect()
    }
}

/// Weighted running average of each class column. Taps falling outside the
/// track are dropped and the remaining weights renormalized; each output row
/// is then renormalized to sum to 1.
pub fn smooth(track: &PointwiseTrack, smoother: &KaiserSmoother) -> PointwiseTrack {
    let w = smoother.weights();
    let half = w.len() / 2;
    let n = track.rows.len();
    let rows = (0..n)
        .map(|t| {
            let lo = t.saturating_sub(half);
            let hi = (t + half).min(n - 1);
            let mut acc = [0.0; K];
            let mut wsum = 0.0;
            for i in lo..=hi {
                let wi = w[i + half - t];
                wsum += wi;
                for (a, p) in acc.iter_mut().zip(&track.rows[i]) {
                    *a += wi * p;
                }
            }
            let total: f64 = acc.iter().map(|a| a / wsum).sum();
            acc.map(|a| a / wsum / total)
        })
        .collect();
    PointwiseTrack { rows }
}

/// Run-length collapse of the per-frame labels inside each core.
pub fn collapse(track: &PointwiseTrack, cores: &[WindowOrigin]) -> Vec<WindowPrediction> {
    let labels = track.labels();
    cores
        .iter()
        .map(|origin| {
            let end = origin.core_end.min(labels.len());
            let start = origin.core_start.min(end);
            let mut tokens: Vec<PrimitiveClass> = Vec::new();
            for &l in &labels[start..end] {
                if tokens.last() != Some(&l) {
                    tokens.push(l);
                }
            }
            WindowPrediction { origin: origin.clone(), tokens }
        })
        .collect()
}

pub fn write_track_csv<W: Write>(writer: W, track: &PointwiseTrack) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["frame"];
    header.extend(PrimitiveClass::ALL.iter().map(|c| c.name()));
    w.write_record(&header)?;
    for (i, row) in track.rows.iter().enumerate() {
        let mut rec = vec![i.to_string()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_track_csv<R: Read>(reader: R) -> Result<PointwiseTrack> {
    let mut r = csv::Reader::from_reader(reader);
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != K + 1 {
            return Err(BaselineError::Parse(format!("row {i} has {} fields", rec.len())));
        }
        let mut row = [0.0; K];
        for (k, v) in row.iter_mut().enumerate() {
            *v = rec[k + 1].parse().map_err(|e| BaselineError::Parse(format!("row {i}: {e}")))?;
        }
        rows.push(row);
    }
    PointwiseTrack::new(rows)
}
