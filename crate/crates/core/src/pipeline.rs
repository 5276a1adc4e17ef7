//! Glue between the stages: sensor-centric preparation, window and target
//! extraction, fold-wise ensemble training, and batch prediction.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::baseline::{
    collapse, extract_all_features, frame_labels, smooth, train_pointwise, BaselineError, KaiserSmoother,
    LogisticRegression, PointwiseClassifier, PointwiseConfig, PointwiseTrack,
};
use crate::dataset::{ensemble_splits, Dataset, DatasetError, DatasetSplit, LabeledRecording, PrimitiveClass};
use crate::decode::{decode_window, stitch_windows, DecodeError, PrimitiveCounts, SessionPrediction, WindowPrediction};
use crate::eval::{align, tally, OutcomeTallies};
use crate::model::{
    member_seed, train_member, train_members, EncoderInput, EnsembleMember, EnsembleModel, MemberData, ModelConfig,
    ModelError, TrainConfig, TrainingExample, TrainingLog,
};
use crate::preprocess::{
    core_starts, derive_target_sequence, extract_window, fit_normalization, sensor_centric_transform,
    PreprocessError, ReferencePolicy, WindowMode, WindowOrigin, WindowSpec, DEFAULT_MIN_OVERLAP_FRAMES,
};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, PipelineError>;

/// Everything that shapes training besides the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainOptions {
    pub window: WindowSpec,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub n_folds: usize,
    pub min_overlap_frames: usize,
    /// Train ensemble members on separate threads.
    #[serde(default)]
    pub concurrent: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            window: WindowSpec::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            n_folds: 4,
            min_overlap_frames: DEFAULT_MIN_OVERLAP_FRAMES,
            concurrent: false,
        }
    }
}

/// Applies the sensor-centric quaternion transform to every recording.
pub fn sensor_centric_recordings(dataset: &Dataset, policy: ReferencePolicy) -> Result<Vec<LabeledRecording>> {
    dataset
        .recordings
        .iter()
        .map(|r| Ok(r.with_recording(sensor_centric_transform(&r.recording, &dataset.manifest, policy)?)?))
        .collect()
}

/// A window pooled to encoder steps but not yet normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledWindow {
    pub origin: WindowOrigin,
    pub pooled: EncoderInput,
    pub target: Vec<PrimitiveClass>,
}

/// Target sequence of every window core of `rec` in `mode`.
pub fn window_targets(
    rec: &LabeledRecording,
    spec: &WindowSpec,
    mode: WindowMode,
    min_overlap: usize,
    max_tokens: usize,
) -> Result<Vec<(WindowOrigin, Vec<PrimitiveClass>)>> {
    let geom = spec.geometry()?;
    let n = rec.recording.n_frames();
    let id = rec.id();
    Ok(core_starts(n, &geom, mode)
        .into_iter()
        .map(|start| {
            let origin = WindowOrigin { recording: id.clone(), core_start: start, core_end: (start + geom.core_len).min(n) };
            let target = derive_target_sequence(rec.segments(), &origin, min_overlap, max_tokens).0;
            (origin, target)
        })
        .collect())
}

pub fn pooled_windows(
    rec: &LabeledRecording,
    spec: &WindowSpec,
    mode: WindowMode,
    stride: usize,
    min_overlap: usize,
    max_tokens: usize,
) -> Result<Vec<PooledWindow>> {
    let geom = spec.geometry()?;
    let r = &rec.recording;
    let id = rec.id();
    window_targets(rec, spec, mode, min_overlap, max_tokens)?
        .into_iter()
        .map(|(origin, target)| {
            let w = extract_window(r.data(), r.channel_count(), r.n_frames(), &geom, origin.core_start, &id);
            let pooled = EncoderInput::from_window(&w, stride)?;
            Ok(PooledWindow { origin, pooled, target })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct EnsembleTraining {
    pub model: EnsembleModel,
    pub logs: Vec<TrainingLog>,
    pub splits: Vec<DatasetSplit>,
}

struct WindowCache {
    train: BTreeMap<String, Vec<PooledWindow>>,
    test: BTreeMap<String, Vec<PooledWindow>>,
}

fn member_fold(
    fold: usize,
    split: &DatasetSplit,
    recordings: &[LabeledRecording],
    cache: &WindowCache,
) -> Result<(crate::preprocess::NormalizationStats, MemberData)> {
    fn in_set<'a>(
        recordings: &'a [LabeledRecording],
        set: &'a BTreeSet<String>,
    ) -> impl Iterator<Item = &'a LabeledRecording> + 'a {
        recordings.iter().filter(move |r| set.contains(&r.recording.subject_id))
    }
    let stats = fit_normalization(in_set(recordings, &split.train_subjects).map(|r| &r.recording), &format!("fold{fold}"))?;
    let normalized = |set: &BTreeSet<String>, windows: &BTreeMap<String, Vec<PooledWindow>>| -> Result<Vec<TrainingExample>> {
        let mut out = Vec::new();
        for r in in_set(recordings, set) {
            for w in &windows[&r.id()] {
                let mut input = w.pooled.clone();
                input.normalize(&stats)?;
                out.push(TrainingExample { origin: w.origin.clone(), input, target: w.target.clone() });
            }
        }
        Ok(out)
    };
    let data = MemberData {
        train: normalized(&split.train_subjects, &cache.train)?,
        val: normalized(&split.val_subjects, &cache.test)?,
    };
    Ok((stats, data))
}

/// Splits `subjects` into member folds and trains one member per fold on
/// `recordings`, which must already be sensor-centric. Recordings of other
/// subjects are ignored.
pub fn train_ensemble(recordings: &[LabeledRecording], subjects: &[String], opts: &TrainOptions) -> Result<EnsembleTraining> {
    opts.model.validate()?;
    opts.train.validate()?;
    let splits = ensemble_splits(subjects, opts.n_folds, opts.train.seed)?;
    let max_tokens = opts.model.max_tokens();
    let stride = opts.model.input_stride;
    let wanted: BTreeSet<&String> = subjects.iter().collect();
    let mut cache = WindowCache { train: BTreeMap::new(), test: BTreeMap::new() };
    for r in recordings.iter().filter(|r| wanted.contains(&r.recording.subject_id)) {
        if r.recording.channel_count() != opts.model.input_dim {
            return Err(PipelineError::Invalid(format!(
                "recording {} has {} channels, model expects {}",
                r.id(),
                r.recording.channel_count(),
                opts.model.input_dim
            )));
        }
        let p = |mode| pooled_windows(r, &opts.window, mode, stride, opts.min_overlap_frames, max_tokens);
        cache.train.insert(r.id(), p(WindowMode::Train)?);
        cache.test.insert(r.id(), p(WindowMode::Test)?);
    }

    let mut members = Vec::new();
    let mut logs = Vec::new();
    if opts.concurrent {
        let mut stats = Vec::new();
        let mut folds = Vec::new();
        for (i, split) in splits.iter().enumerate() {
            let (s, d) = member_fold(i, split, recordings, &cache)?;
            stats.push(s);
            folds.push(d);
        }
        for ((params, log), s) in train_members(&folds, &opts.model, &opts.train, true)?.into_iter().zip(stats) {
            members.push(EnsembleMember::new(params, s)?);
            logs.push(log);
        }
    } else {
        for (i, split) in splits.iter().enumerate() {
            let (s, d) = member_fold(i, split, recordings, &cache)?;
            let cfg = TrainConfig { seed: member_seed(opts.train.seed, i), ..opts.train.clone() };
            let (params, log) = train_member(&d, &opts.model, &cfg)?;
            members.push(EnsembleMember::new(params, s)?);
            logs.push(log);
        }
    }
    Ok(EnsembleTraining { model: EnsembleModel::new(members)?, logs, splits })
}

/// Decodes every test-mode window of a sensor-centric recording.
pub fn predict_windows(ensemble: &EnsembleModel, rec: &LabeledRecording, spec: &WindowSpec) -> Result<Vec<WindowPrediction>> {
    let r = &rec.recording;
    if r.channel_count() != ensemble.config().input_dim {
        return Err(PipelineError::Invalid(format!(
            "recording {} has {} channels, model expects {}",
            rec.id(),
            r.channel_count(),
            ensemble.config().input_dim
        )));
    }
    let geom = spec.geometry()?;
    let id = rec.id();
    core_starts(r.n_frames(), &geom, WindowMode::Test)
        .into_iter()
        .map(|s| {
            let w = extract_window(r.data(), r.channel_count(), r.n_frames(), &geom, s, &id);
            Ok(decode_window(ensemble.members(), &w)?)
        })
        .collect()
}

/// Window- and session-level comparison of one recording's predictions with
/// its labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingOutcome {
    pub recording: String,
    pub subject: String,
    pub activity: String,
    /// Tallies summed over the recording's test-mode windows.
    pub window_tallies: OutcomeTallies,
    pub n_windows: usize,
    /// Mean of per-window AER over windows.
    pub mean_window_aer: f64,
    /// Stitched prediction against the full segment sequence.
    pub session_tallies: OutcomeTallies,
    pub true_counts: PrimitiveCounts,
    pub predicted_counts: PrimitiveCounts,
    pub session: SessionPrediction,
}

pub fn score_recording(
    rec: &LabeledRecording,
    predictions: &[WindowPrediction],
    spec: &WindowSpec,
    min_overlap: usize,
    max_tokens: usize,
) -> Result<RecordingOutcome> {
    let targets = window_targets(rec, spec, WindowMode::Test, min_overlap, max_tokens)?;
    if targets.len() != predictions.len() || targets.iter().zip(predictions).any(|(t, p)| t.0 != p.origin) {
        return Err(PipelineError::Invalid(format!("predictions do not match the windows of {}", rec.id())));
    }
    let mut window_tallies = OutcomeTallies::default();
    let mut aer_sum = 0.0;
    for ((_, target), pred) in targets.iter().zip(predictions) {
        let t = tally(&align(target, &pred.tokens));
        aer_sum += t.distance() as f64 / target.len() as f64;
        window_tallies.add(&t);
    }
    let session = stitch_windows(predictions)?;
    let truth = rec.token_sequence();
    let activity = rec.recording.activity.clone();
    Ok(RecordingOutcome {
        recording: rec.id(),
        subject: rec.recording.subject_id.clone(),
        activity: activity.clone(),
        window_tallies,
        n_windows: predictions.len(),
        mean_window_aer: aer_sum / predictions.len() as f64,
        session_tallies: tally(&align(&truth, &session.sequence)),
        true_counts: PrimitiveCounts::from_tokens(&truth).with_activity(activity.clone()),
        predicted_counts: PrimitiveCounts::from_tokens(&session.sequence).with_activity(activity),
        session,
    })
}

/// Pointwise baseline settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineOptions {
    pub pointwise: PointwiseConfig,
    /// Odd smoothing window length in frames.
    pub kaiser_length: usize,
    pub kaiser_beta: f64,
}

impl Default for BaselineOptions {
    fn default() -> Self {
        Self { pointwise: PointwiseConfig::default(), kaiser_length: 51, kaiser_beta: 4.0 }
    }
}

fn labeled_features(
    rec: &LabeledRecording,
    context: usize,
    step: usize,
) -> (Vec<Vec<f64>>, Vec<PrimitiveClass>) {
    let labels = frame_labels(rec.segments(), rec.recording.n_frames());
    extract_all_features(&rec.recording, context, step).into_iter().map(|(t, f)| (f, labels[t])).unzip()
}

/// Fits the pointwise classifier on frames of the given subjects.
pub fn train_baseline(
    recordings: &[LabeledRecording],
    subjects: &[String],
    opts: &BaselineOptions,
) -> Result<(LogisticRegression, crate::baseline::TrainingReport)> {
    let wanted: BTreeSet<&String> = subjects.iter().collect();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for r in recordings.iter().filter(|r| wanted.contains(&r.recording.subject_id)) {
        let (x, y) = labeled_features(r, opts.pointwise.context_frames, opts.pointwise.frame_step);
        xs.extend(x);
        ys.extend(y);
    }
    Ok(train_pointwise(&xs, &ys, &opts.pointwise)?)
}

/// Frame accuracy of unsmoothed pointwise predictions.
pub fn pointwise_accuracy<C: PointwiseClassifier>(classifier: &C, recordings: &[&LabeledRecording], context: usize) -> f64 {
    let (mut hits, mut total) = (0usize, 0usize);
    for r in recordings {
        let labels = frame_labels(r.segments(), r.recording.n_frames());
        for (t, f) in extract_all_features(&r.recording, context, 1) {
            let p = classifier.predict_proba(&f);
            hits += usize::from(PrimitiveClass::from_code(crate::baseline::argmax_class(&p)) == Some(labels[t]));
            total += 1;
        }
    }
    hits as f64 / total.max(1) as f64
}

/// Smoothed, collapsed baseline predictions for every test-mode core.
pub fn baseline_windows<C: PointwiseClassifier>(
    classifier: &C,
    rec: &LabeledRecording,
    spec: &WindowSpec,
    opts: &BaselineOptions,
) -> Result<Vec<WindowPrediction>> {
    let smoother = KaiserSmoother::new(opts.kaiser_length, opts.kaiser_beta)?;
    let track = PointwiseTrack::from_classifier(&rec.recording, classifier, opts.pointwise.context_frames)?;
    let smoothed = smooth(&track, &smoother);
    let cores: Vec<WindowOrigin> = window_targets(rec, spec, WindowMode::Test, 0, usize::MAX)?.into_iter().map(|(o, _)| o).collect();
    Ok(collapse(&smoothed, &cores))
}
