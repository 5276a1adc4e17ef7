use crate::dataset::{ImuRecording, PrimitiveClass, PrimitiveSegment};

pub const DEFAULT_CONTEXT_FRAMES: usize = 100;

/// Five statistics per channel over a context window.
#[derive(Debug, Clone, PartialEq)]
pub struct StatFeatures {
    pub mean: Vec<f64>,
    pub max: Vec<f64>,
    pub min: Vec<f64>,
    /// Population standard deviation.
    pub std: Vec<f64>,
    pub rms: Vec<f64>,
}

impl StatFeatures {
    /// Flattened as `[mean.., max.., min.., std.., rms..]`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.mean.len() * 5);
        for part in [&self.mean, &self.max, &self.min, &self.std, &self.rms] {
            v.extend_from_slice(part);
        }
        v
    }
}

/// Context frames around `t`: `context` frames starting `context / 2`
/// before `t`, truncated at the recording edges.
fn context_range(t: usize, n: usize, context: usize) -> (usize, usize) {
    let start = t.saturating_sub(context / 2);
    let end = (t + context.max(1) - context / 2).min(n);
    (start, end.max(start + 1).min(n))
}

pub fn extract_features(recording: &ImuRecording, t: usize, context_frames: usize) -> StatFeatures {
    let ch = recording.channel_count();
    let n = recording.n_frames();
    let (start, end) = context_range(t.min(n - 1), n, context_frames);
    let count = (end - start) as f64;
    let mut f = StatFeatures {
        mean: vec![0.0; ch],
        max: vec![f64::NEG_INFINITY; ch],
        min: vec![f64::INFINITY; ch],
        std: vec![0.0; ch],
        rms: vec![0.0; ch],
    };
    for i in start..end {
        for (c, &v) in recording.frame(i).iter().enumerate() {
            f.mean[c] += v;
            f.rms[c] += v * v;
            f.max[c] = f.max[c].max(v);
            f.min[c] = f.min[c].min(v);
        }
    }
    for c in 0..ch {
        f.mean[c] /= count;
        f.rms[c] = (f.rms[c] / count).sqrt();
    }
    for i in start..end {
        for (c, &v) in recording.frame(i).iter().enumerate() {
            let d = v - f.mean[c];
            f.std[c] += d * d;
        }
    }
    for c in 0..ch {
        f.std[c] = (f.std[c] / count).sqrt();
        // rounding can push the mean a hair outside [min, max] on constant data
        f.mean[c] = f.mean[c].clamp(f.min[c], f.max[c]);
    }
    f
}

/// Flattened features for frames `0, step, 2*step, ...`.
pub fn extract_all_features(recording: &ImuRecording, context_frames: usize, step: usize) -> Vec<(usize, Vec<f64>)> {
    (0..recording.n_frames())
        .step_by(step.max(1))
        .map(|t| (t, extract_features(recording, t, context_frames).to_vec()))
        .collect()
}

/// Class of every frame under a tiling segmentation.
pub fn frame_labels(segments: &[PrimitiveSegment], n_frames: usize) -> Vec<PrimitiveClass> {
    let mut out = Vec::with_capacity(n_frames);
    for s in segments {
        out.extend(std::iter::repeat(s.class).take(s.len()));
    }
    out.truncate(n_frames);
    out
}
