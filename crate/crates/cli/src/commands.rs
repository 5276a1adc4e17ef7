//! The seven commands. Each reads what earlier commands wrote to the output
//! directory and merges its own section into `report.json`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use primseq::baseline::LogisticRegression;
use primseq::dataset::synth::synthesize_dataset;
use primseq::dataset::{holdout_subjects, load_dataset, save_dataset, ChannelManifest, Dataset, LabeledRecording, PrimitiveClass};
use primseq::decode::{
    count, counting_error, decode_window, stitch_windows, write_counts_csv, CountingError, PrimitiveCounts,
    WindowPrediction,
};
use primseq::eval::{aggregate, confusion_matrix, spearman_rho, ConfusionMatrix, GroupBy, GroupMetrics, LabeledTallies, OutcomeTallies};
use primseq::model::{load_member, save_member, EnsembleModel, TrainingLog};
use primseq::pipeline::{
    baseline_windows, predict_windows, score_recording, sensor_centric_recordings, train_baseline,
    train_ensemble, RecordingOutcome,
};
use primseq::preprocess::{core_starts, extract_window, WindowMode, WindowOrigin};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::report::{update_report, StageTimer};
use crate::stream::stream_replay;
use crate::{CliError, RunConfig};

pub const DATASET_DIR: &str = "dataset";
pub const BASELINE_FILE: &str = "baseline.json";
pub const SPLIT_FILE: &str = "split.json";
pub const PREDICTIONS_FILE: &str = "predictions.json";
pub const COUNTS_FILE: &str = "counts.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const BENCH_FILE: &str = "bench.json";
pub const EVENTS_FILE: &str = "stream_events.jsonl";

pub fn model_file(fold: usize) -> String {
    format!("model.{fold}.bin")
}

pub struct Context {
    pub cfg: RunConfig,
    pub workers: usize,
}

impl Context {
    fn out(&self) -> Result<&Path, CliError> {
        fs::create_dir_all(&self.cfg.out_dir)?;
        Ok(&self.cfg.out_dir)
    }

    fn report<S: Serialize>(&self, name: &str, section: &S, timer: &StageTimer) -> Result<(), CliError> {
        self.report_with(name, section, None, timer)
    }

    fn report_with<S: Serialize>(
        &self,
        name: &str,
        section: &S,
        timing: Option<serde_json::Value>,
        timer: &StageTimer,
    ) -> Result<(), CliError> {
        update_report(self.out()?, &self.cfg.hash(), name, section, timing, timer)
    }
}

/// Maps `f` over `items` on up to `workers` threads; results keep input order.
pub fn par_map<T: Sync, R: Send>(
    items: &[T],
    workers: usize,
    f: impl Fn(&T) -> Result<R, CliError> + Sync,
) -> Result<Vec<R>, CliError> {
    let workers = workers.clamp(1, items.len().max(1));
    if workers == 1 {
        return items.iter().map(&f).collect();
    }
    let chunk = items.len().div_ceil(workers);
    std::thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|part| {
                let f = &f;
                s.spawn(move || part.iter().map(f).collect::<Result<Vec<R>, CliError>>())
            })
            .collect();
        let mut out = Vec::with_capacity(items.len());
        for h in handles {
            out.extend(h.join().map_err(|_| CliError::Runtime("worker thread panicked".into()))??);
        }
        Ok(out)
    })
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, what: &str) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Runtime(format!("cannot read {what} {}: {e} (run the earlier commands first)", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

// ---- synth ---------------------------------------------------------------

#[derive(Debug, Serialize)]
struct SynthSection {
    dataset_dir: String,
    n_subjects: usize,
    n_recordings: usize,
    n_segments: usize,
    n_frames: usize,
    channel_count: usize,
}

pub fn synth(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let mut timer = StageTimer::default();
    let manifest = match &cfg.manifest {
        Some(p) => ChannelManifest::load(p)?,
        None => ChannelManifest::default_77(),
    };
    let ds = timer.time("generate", || synthesize_dataset(&cfg.synth, &manifest, cfg.seed))?;
    let dir = ctx.out()?.join(DATASET_DIR);
    if dir.exists() {
        fs::remove_dir_all(&dir)?;
    }
    timer.time("write", || save_dataset(&dir, &ds))?;
    let section = SynthSection {
        dataset_dir: DATASET_DIR.into(),
        n_subjects: ds.subjects.len(),
        n_recordings: ds.recordings.len(),
        n_segments: ds.recordings.iter().map(|r| r.segments().len()).sum(),
        n_frames: ds.recordings.iter().map(|r| r.recording.n_frames()).sum(),
        channel_count: manifest.channel_count(),
    };
    ctx.report("synth", &section, &timer)
}

// ---- shared loading -------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeldOutSplit {
    pub train_subjects: Vec<String>,
    pub test_subjects: Vec<String>,
}

struct Loaded {
    dataset: Dataset,
    /// Sensor-centric copies of `dataset.recordings`, same order.
    recordings: Vec<LabeledRecording>,
}

fn load(ctx: &Context, timer: &mut StageTimer) -> Result<Loaded, CliError> {
    let dataset = timer.time("load", || load_dataset(&ctx.cfg.data_path()))?;
    let recordings = timer.time("sensor_centric", || sensor_centric_recordings(&dataset, ctx.cfg.reference_policy))?;
    Ok(Loaded { dataset, recordings })
}

fn held_out_split(ctx: &Context, dataset: &Dataset) -> Result<HeldOutSplit, CliError> {
    let (rest, test) = holdout_subjects(&dataset.subject_ids(), ctx.cfg.test_subjects, ctx.cfg.seed)?;
    Ok(HeldOutSplit { train_subjects: rest, test_subjects: test.into_iter().collect() })
}

/// Recordings scored by predict/eval/bench/stream: the held-out subjects, or
/// every recording when nothing is held out.
fn scored<'a>(recordings: &'a [LabeledRecording], split: &HeldOutSplit) -> Vec<&'a LabeledRecording> {
    let test: BTreeSet<&String> = split.test_subjects.iter().collect();
    recordings
        .iter()
        .filter(|r| test.is_empty() || test.contains(&r.recording.subject_id))
        .collect()
}

pub fn load_ensemble(dir: &Path) -> Result<EnsembleModel, CliError> {
    let mut members = Vec::new();
    loop {
        let path = dir.join(model_file(members.len()));
        if !path.exists() {
            break;
        }
        members.push(load_member(&path)?);
    }
    if members.is_empty() {
        return Err(CliError::Runtime(format!("no {} in {} (run train first)", model_file(0), dir.display())));
    }
    Ok(EnsembleModel::new(members)?)
}

// ---- train ----------------------------------------------------------------

#[derive(Debug, Serialize)]
struct MemberSection {
    fold: usize,
    train_subjects: Vec<String>,
    val_subjects: Vec<String>,
    log: TrainingLog,
}

#[derive(Debug, Serialize)]
struct TrainSection {
    split: HeldOutSplit,
    n_parameters: usize,
    members: Vec<MemberSection>,
    baseline_epoch_loss: Vec<f64>,
    baseline_train_accuracy: f64,
}

pub fn train(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let mut timer = StageTimer::default();
    let data = load(ctx, &mut timer)?;
    let split = held_out_split(ctx, &data.dataset)?;
    let opts = cfg.train_options(ctx.workers > 1);
    let trained = timer.time("ensemble", || train_ensemble(&data.recordings, &split.train_subjects, &opts))?;
    let out = ctx.out()?.to_path_buf();
    for (i, m) in trained.model.members().iter().enumerate() {
        save_member(&out.join(model_file(i)), m)?;
    }
    // drop members left over from an earlier, larger ensemble
    let mut stale = trained.model.len();
    while out.join(model_file(stale)).exists() {
        fs::remove_file(out.join(model_file(stale)))?;
        stale += 1;
    }
    let (baseline, rep) = timer.time("baseline", || train_baseline(&data.recordings, &split.train_subjects, &cfg.baseline))?;
    write_json(&out.join(BASELINE_FILE), &baseline)?;
    write_json(&out.join(SPLIT_FILE), &split)?;

    let members = trained
        .splits
        .iter()
        .zip(trained.logs)
        .enumerate()
        .map(|(fold, (s, log))| MemberSection {
            fold,
            train_subjects: s.train_subjects.iter().cloned().collect(),
            val_subjects: s.val_subjects.iter().cloned().collect(),
            log,
        })
        .collect();
    let section = TrainSection {
        split,
        n_parameters: trained.model.members()[0].params.len(),
        members,
        baseline_epoch_loss: rep.epoch_loss,
        baseline_train_accuracy: rep.train_accuracy,
    };
    ctx.report("train", &section, &timer)
}

// ---- predict --------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowTokens {
    pub core_start: usize,
    pub core_end: usize,
    pub tokens: Vec<PrimitiveClass>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingPredictions {
    pub recording: String,
    pub subject: String,
    pub activity: String,
    pub model: Vec<WindowTokens>,
    pub baseline: Vec<WindowTokens>,
}

impl RecordingPredictions {
    pub fn windows(&self, baseline: bool) -> Vec<WindowPrediction> {
        let src = if baseline { &self.baseline } else { &self.model };
        src.iter()
            .map(|w| WindowPrediction {
                origin: WindowOrigin { recording: self.recording.clone(), core_start: w.core_start, core_end: w.core_end },
                tokens: w.tokens.clone(),
            })
            .collect()
    }
}

fn window_tokens(preds: &[WindowPrediction]) -> Vec<WindowTokens> {
    preds
        .iter()
        .map(|p| WindowTokens { core_start: p.origin.core_start, core_end: p.origin.core_end, tokens: p.tokens.clone() })
        .collect()
}

pub fn predict(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let mut timer = StageTimer::default();
    let data = load(ctx, &mut timer)?;
    let out = ctx.out()?.to_path_buf();
    let split: HeldOutSplit = read_json(&out.join(SPLIT_FILE), "split")?;
    let ensemble = timer.time("load_models", || load_ensemble(&out))?;
    let baseline: LogisticRegression = read_json(&out.join(BASELINE_FILE), "baseline")?;
    let recs = scored(&data.recordings, &split);

    let t = Instant::now();
    let model = par_map(&recs, ctx.workers, |r| Ok(predict_windows(&ensemble, r, &cfg.window)?))?;
    timer.add("ensemble_decode", t.elapsed().as_secs_f64());
    let t = Instant::now();
    let base = par_map(&recs, ctx.workers, |r| Ok(baseline_windows(&baseline, r, &cfg.window, &cfg.baseline)?))?;
    timer.add("baseline_decode", t.elapsed().as_secs_f64());

    let predictions: Vec<RecordingPredictions> = recs
        .iter()
        .zip(model.iter().zip(&base))
        .map(|(r, (m, b))| RecordingPredictions {
            recording: r.id(),
            subject: r.recording.subject_id.clone(),
            activity: r.recording.activity.clone(),
            model: window_tokens(m),
            baseline: window_tokens(b),
        })
        .collect();
    write_json(&out.join(PREDICTIONS_FILE), &predictions)?;
    let section = json!({
        "n_recordings": predictions.len(),
        "n_windows": predictions.iter().map(|p| p.model.len()).sum::<usize>(),
        "n_members": ensemble.len(),
    });
    ctx.report("predict", &section, &timer)
}

fn read_predictions(out: &Path) -> Result<Vec<RecordingPredictions>, CliError> {
    read_json(&out.join(PREDICTIONS_FILE), "predictions")
}

// ---- count ----------------------------------------------------------------

#[derive(Debug, Serialize)]
struct RecordingCounts {
    recording: String,
    subject: String,
    activity: String,
    true_counts: PrimitiveCounts,
    predicted_counts: PrimitiveCounts,
    error: CountingError,
}

#[derive(Debug, Serialize)]
struct CountSection {
    recordings: Vec<RecordingCounts>,
    /// Counts pooled per activity, then compared.
    per_activity: BTreeMap<String, CountingError>,
    overall: CountingError,
}

pub fn count_command(ctx: &Context) -> Result<(), CliError> {
    let mut timer = StageTimer::default();
    let data = load(ctx, &mut timer)?;
    let out = ctx.out()?.to_path_buf();
    let preds = read_predictions(&out)?;
    let by_id: BTreeMap<String, &LabeledRecording> = data.recordings.iter().map(|r| (r.id(), r)).collect();

    let mut rows = Vec::new();
    let mut csv_rows = Vec::new();
    let mut activity_totals: BTreeMap<String, (PrimitiveCounts, PrimitiveCounts)> = BTreeMap::new();
    let (mut all_true, mut all_pred) = (PrimitiveCounts::default(), PrimitiveCounts::default());
    for p in &preds {
        let rec = by_id
            .get(&p.recording)
            .ok_or_else(|| CliError::Runtime(format!("predictions mention unknown recording {}", p.recording)))?;
        let session = timer.time("stitch", || stitch_windows(&p.windows(false)))?;
        let predicted = count(&session).with_activity(p.activity.clone());
        let truth = PrimitiveCounts::from_tokens(&rec.token_sequence()).with_activity(p.activity.clone());
        let entry = activity_totals.entry(p.activity.clone()).or_default();
        entry.0.add(&truth);
        entry.1.add(&predicted);
        all_true.add(&truth);
        all_pred.add(&predicted);
        csv_rows.push((p.recording.clone(), predicted.clone()));
        rows.push(RecordingCounts {
            recording: p.recording.clone(),
            subject: p.subject.clone(),
            activity: p.activity.clone(),
            error: counting_error(&truth, &predicted),
            true_counts: truth,
            predicted_counts: predicted,
        });
    }
    let file = fs::File::create(out.join(COUNTS_FILE))?;
    write_counts_csv(BufWriter::new(file), &csv_rows)?;
    let section = CountSection {
        recordings: rows,
        per_activity: activity_totals.iter().map(|(a, (t, p))| (a.clone(), counting_error(t, p))).collect(),
        overall: counting_error(&all_true, &all_pred),
    };
    ctx.report("count", &section, &timer)
}

// ---- eval -----------------------------------------------------------------

#[derive(Debug, Serialize)]
pub struct LevelReport {
    pub groups: Vec<GroupMetrics>,
    pub tallies: OutcomeTallies,
    pub confusion: ConfusionMatrix,
}

#[derive(Debug, Serialize)]
pub struct SystemReport {
    pub window: LevelReport,
    pub session: LevelReport,
    /// Spearman correlation of per-subject session F1 with UE-FMA; absent
    /// with fewer than two subjects or a constant series.
    pub f1_vs_ue_fma_rho: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct EvalSection {
    pub model: SystemReport,
    pub baseline: SystemReport,
}

fn level_report(items: &[LabeledTallies]) -> Result<LevelReport, CliError> {
    let mut groups = Vec::new();
    for by in [GroupBy::Overall, GroupBy::PrimitiveClass, GroupBy::Activity, GroupBy::Subject] {
        groups.extend(aggregate(items, by)?);
    }
    let mut tallies = OutcomeTallies::default();
    for i in items {
        tallies.add(&i.tallies);
    }
    Ok(LevelReport { confusion: confusion_matrix(&tallies), groups, tallies })
}

fn system_report(outcomes: &[RecordingOutcome], dataset: &Dataset) -> Result<SystemReport, CliError> {
    let label = |o: &RecordingOutcome, t: &OutcomeTallies| LabeledTallies {
        subject: o.subject.clone(),
        activity: o.activity.clone(),
        tallies: t.clone(),
    };
    let window: Vec<LabeledTallies> = outcomes.iter().map(|o| label(o, &o.window_tallies)).collect();
    let session: Vec<LabeledTallies> = outcomes.iter().map(|o| label(o, &o.session_tallies)).collect();
    let session_report = level_report(&session)?;

    let (mut fma, mut f1) = (Vec::new(), Vec::new());
    for g in session_report.groups.iter().filter(|g| g.group_by == GroupBy::Subject) {
        if let (Some(info), Some(v)) = (dataset.subject(&g.key), g.metrics.f1) {
            fma.push(f64::from(info.ue_fma_score));
            f1.push(v);
        }
    }
    let rho = if f1.len() >= 2 { spearman_rho(&f1, &fma)? } else { None };
    Ok(SystemReport { window: level_report(&window)?, session: session_report, f1_vs_ue_fma_rho: rho })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_metrics_csv(path: &Path, section: &EvalSection) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "system", "level", "group_by", "key", "tp", "fn", "fp", "sensitivity", "fdr", "f1", "aer", "n_subjects",
        "sensitivity_mean", "sensitivity_std", "fdr_mean", "fdr_std", "f1_mean", "f1_std",
    ])?;
    for (system, rep) in [("model", &section.model), ("baseline", &section.baseline)] {
        for (level, lr) in [("window", &rep.window), ("session", &rep.session)] {
            for g in &lr.groups {
                let m = &g.metrics;
                let s = g.across_subjects.as_ref();
                let mean = |f: fn(&primseq::eval::SubjectSpread) -> Option<primseq::eval::MeanStd>| {
                    let ms = s.and_then(f);
                    (opt(ms.map(|x| x.mean)), opt(ms.and_then(|x| x.std)))
                };
                let (sm, ss) = mean(|s| s.sensitivity);
                let (dm, ds) = mean(|s| s.fdr);
                let (fm, fs) = mean(|s| s.f1);
                let by = serde_json::to_value(g.group_by)?.as_str().unwrap_or_default().to_string();
                w.write_record([
                    system.to_string(),
                    level.to_string(),
                    by,
                    g.key.clone(),
                    m.tp.to_string(),
                    m.false_negatives.to_string(),
                    m.false_positives.to_string(),
                    opt(m.sensitivity),
                    opt(m.fdr),
                    opt(m.f1),
                    opt(m.aer),
                    g.n_subjects.to_string(),
                    sm,
                    ss,
                    dm,
                    ds,
                    fm,
                    fs,
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn eval(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let mut timer = StageTimer::default();
    let data = load(ctx, &mut timer)?;
    let out = ctx.out()?.to_path_buf();
    let preds = read_predictions(&out)?;
    if preds.is_empty() {
        return Err(CliError::Runtime("no predictions to evaluate".into()));
    }
    let by_id: BTreeMap<String, &LabeledRecording> = data.recordings.iter().map(|r| (r.id(), r)).collect();
    let max_tokens = cfg.model.max_tokens();
    let t = Instant::now();
    let outcomes = par_map(&preds, ctx.workers, |p| {
        let rec = by_id
            .get(&p.recording)
            .ok_or_else(|| CliError::Runtime(format!("predictions mention unknown recording {}", p.recording)))?;
        let m = score_recording(rec, &p.windows(false), &cfg.window, cfg.min_overlap_frames, max_tokens)?;
        let b = score_recording(rec, &p.windows(true), &cfg.window, cfg.min_overlap_frames, max_tokens)?;
        Ok((m, b))
    })?;
    timer.add("score", t.elapsed().as_secs_f64());
    let (model, base): (Vec<_>, Vec<_>) = outcomes.into_iter().unzip();
    let section = EvalSection { model: system_report(&model, &data.dataset)?, baseline: system_report(&base, &data.dataset)? };
    write_metrics_csv(&out.join(METRICS_FILE), &section)?;
    ctx.report("eval", &section, &timer)
}

// ---- bench ----------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub n_recordings: usize,
    pub n_windows: usize,
    pub recording_minutes: f64,
    pub extract_s: f64,
    pub decode_s: f64,
    pub stitch_s: f64,
    pub count_s: f64,
    pub total_s: f64,
    /// Compute seconds per minute of recording.
    pub seconds_per_minute: f64,
}

/// Times window extraction, ensemble decoding, stitching and counting over
/// `recordings` on one thread.
pub fn bench_recordings(ensemble: &EnsembleModel, recordings: &[&LabeledRecording], cfg: &RunConfig) -> Result<BenchReport, CliError> {
    let geom = cfg.window.geometry().map_err(|e| CliError::Config(e.to_string()))?;
    let mut rep = BenchReport {
        n_recordings: recordings.len(),
        n_windows: 0,
        recording_minutes: 0.0,
        extract_s: 0.0,
        decode_s: 0.0,
        stitch_s: 0.0,
        count_s: 0.0,
        total_s: 0.0,
        seconds_per_minute: 0.0,
    };
    for rec in recordings {
        let r = &rec.recording;
        rep.recording_minutes += r.duration_s() / 60.0;
        let id = rec.id();
        let mut preds = Vec::new();
        for s in core_starts(r.n_frames(), &geom, WindowMode::Test) {
            let t = Instant::now();
            let w = extract_window(r.data(), r.channel_count(), r.n_frames(), &geom, s, &id);
            rep.extract_s += t.elapsed().as_secs_f64();
            let t = Instant::now();
            preds.push(decode_window(ensemble.members(), &w)?);
            rep.decode_s += t.elapsed().as_secs_f64();
        }
        rep.n_windows += preds.len();
        let t = Instant::now();
        let session = stitch_windows(&preds)?;
        rep.stitch_s += t.elapsed().as_secs_f64();
        let t = Instant::now();
        std::hint::black_box(count(&session));
        rep.count_s += t.elapsed().as_secs_f64();
    }
    rep.total_s = rep.extract_s + rep.decode_s + rep.stitch_s + rep.count_s;
    rep.seconds_per_minute = if rep.recording_minutes > 0.0 { rep.total_s / rep.recording_minutes } else { 0.0 };
    Ok(rep)
}

pub fn bench(ctx: &Context) -> Result<(), CliError> {
    let mut timer = StageTimer::default();
    let data = load(ctx, &mut timer)?;
    let out = ctx.out()?.to_path_buf();
    let ensemble = load_ensemble(&out)?;
    let split = match read_json::<HeldOutSplit>(&out.join(SPLIT_FILE), "split") {
        Ok(s) => s,
        Err(_) => HeldOutSplit { train_subjects: Vec::new(), test_subjects: Vec::new() },
    };
    let recs = scored(&data.recordings, &split);
    let rep = bench_recordings(&ensemble, &recs, &ctx.cfg)?;
    write_json(&out.join(BENCH_FILE), &rep)?;
    let section = json!({
        "n_recordings": rep.n_recordings,
        "n_windows": rep.n_windows,
        "recording_minutes": rep.recording_minutes,
    });
    ctx.report_with("bench", &section, Some(serde_json::to_value(&rep)?), &timer)
}

// ---- stream ---------------------------------------------------------------

#[derive(Debug, Serialize)]
struct StreamRecording {
    recording: String,
    sequence: Vec<PrimitiveClass>,
    counts: PrimitiveCounts,
    matches_batch: bool,
}

pub fn stream(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let mut timer = StageTimer::default();
    let data = load(ctx, &mut timer)?;
    let out = ctx.out()?.to_path_buf();
    let ensemble = load_ensemble(&out)?;
    let split: HeldOutSplit = read_json(&out.join(SPLIT_FILE), "split")?;
    let test: BTreeSet<&String> = split.test_subjects.iter().collect();

    let mut events = BufWriter::new(fs::File::create(out.join(EVENTS_FILE))?);
    let mut recordings = Vec::new();
    let mut lags = BTreeMap::new();
    for (raw, rec) in data.dataset.recordings.iter().zip(&data.recordings) {
        if !test.is_empty() && !test.contains(&rec.recording.subject_id) {
            continue;
        }
        let outcome = stream_replay(
            &raw.recording,
            &data.dataset.manifest,
            cfg.reference_policy,
            &ensemble,
            &cfg.window,
            cfg.stream_speed,
        )?;
        for e in &outcome.events {
            serde_json::to_writer(&mut events, e)?;
            events.write_all(b"\n")?;
        }
        let batch = stitch_windows(&predict_windows(&ensemble, rec, &cfg.window)?)?;
        recordings.push(StreamRecording {
            recording: rec.id(),
            matches_batch: batch.sequence == outcome.session.sequence,
            sequence: outcome.session.sequence,
            counts: outcome.counts,
        });
        lags.insert(rec.id(), outcome.lag);
    }
    events.flush()?;
    ctx.report_with("stream", &json!({ "recordings": recordings }), Some(json!({ "lag": lags })), &timer)
}

/// Directory holding a `synth` dataset written under `out`.
pub fn dataset_dir(out: &Path) -> PathBuf {
    out.join(DATASET_DIR)
}
