//! Real-time replay: a producer thread releases frames on a scaled clock, a
//! consumer cuts each window as soon as its trailing flank has arrived,
//! decodes it and extends the stitched sequence.

use std::sync::mpsc::sync_channel;
use std::thread;
use std::time::{Duration, Instant};

use primseq::dataset::{ChannelManifest, ImuRecording, PrimitiveClass};
use primseq::decode::{decode_window, PrimitiveCounts, SessionPrediction, Stitcher};
use primseq::model::EnsembleModel;
use primseq::preprocess::{core_starts, extract_window, ReferencePolicy, SensorCentric, WindowMode, WindowSpec};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Frames per message when the clock is not throttled.
const UNTHROTTLED_CHUNK: usize = 64;
const CHANNEL_CAPACITY: usize = 32;

/// One count update, emitted after a window has been decoded and stitched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamEvent {
    pub recording: String,
    pub window: usize,
    pub core_start_s: f64,
    pub core_end_s: f64,
    /// Seconds since the replay started.
    pub emitted_s: f64,
    /// `emitted_s` minus the moment the core's last frame was released.
    pub lag_s: f64,
    /// Decode and stitch time of this window.
    pub compute_s: f64,
    pub new_tokens: Vec<PrimitiveClass>,
    pub counts: PrimitiveCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagReport {
    pub speed: f64,
    pub lags_s: Vec<f64>,
    pub max_lag_s: f64,
    /// The last core ends with the recording and has no trailing flank to
    /// wait for, so its lag is not bounded below by the flank.
    pub max_lag_except_final_s: Option<f64>,
    pub max_compute_s: f64,
    pub mean_compute_s: f64,
}

#[derive(Debug, Clone)]
pub struct StreamOutcome {
    pub events: Vec<StreamEvent>,
    pub session: SessionPrediction,
    pub counts: PrimitiveCounts,
    pub lag: LagReport,
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Replays a raw recording through the sensor-centric transform and the
/// ensemble at `speed` times real time (`f64::INFINITY` for no throttling).
pub fn stream_replay(
    recording: &ImuRecording,
    manifest: &ChannelManifest,
    policy: ReferencePolicy,
    ensemble: &EnsembleModel,
    spec: &WindowSpec,
    speed: f64,
) -> Result<StreamOutcome, CliError> {
    let ch = recording.channel_count();
    if ch != ensemble.config().input_dim || ch != manifest.channel_count() {
        return Err(CliError::Runtime(format!(
            "recording {} has {ch} channels; ensemble expects {}, manifest lists {}",
            recording.id(),
            ensemble.config().input_dim,
            manifest.channel_count()
        )));
    }
    if !(speed > 0.0) {
        return Err(CliError::Config("speed must be positive".into()));
    }
    let geom = spec.geometry().map_err(|e| CliError::Config(e.to_string()))?;
    let rate = recording.sample_rate_hz * speed;
    let frame_time = |frames: usize| if speed.is_finite() { frames as f64 / rate } else { 0.0 };
    let id = recording.id();
    let total = recording.n_frames();
    let ref_index = match policy {
        ReferencePolicy::FirstFrame => 0,
        ReferencePolicy::Frame(i) => i.min(total.saturating_sub(1)),
    };

    // a real-time producer must never wait on the consumer, so its buffer
    // holds the whole recording; only the unthrottled replay is bounded
    let capacity = if speed.is_finite() { total.max(1) } else { CHANNEL_CAPACITY };
    let (tx, rx) = sync_channel::<Vec<f64>>(capacity);
    let start = Instant::now();
    thread::scope(|s| {
        let producer = s.spawn(move || {
            let data = recording.data();
            let chunk = if speed.is_finite() { 1 } else { UNTHROTTLED_CHUNK };
            let mut i = 0;
            while i < total {
                let end = (i + chunk).min(total);
                if speed.is_finite() {
                    // frame k is complete at (k + 1) / rate
                    let due = Duration::from_secs_f64(end as f64 / rate);
                    if let Some(wait) = due.checked_sub(start.elapsed()) {
                        thread::sleep(wait);
                    }
                }
                if tx.send(data[i * ch..end * ch].to_vec()).is_err() {
                    return;
                }
                i = end;
            }
        });

        let mut raw: Vec<f64> = Vec::new();
        let mut data: Vec<f64> = Vec::with_capacity(total * ch);
        let mut transform: Option<SensorCentric> = None;
        let mut stitcher = Stitcher::new();
        let mut counts = PrimitiveCounts::default();
        let mut events = Vec::new();
        let mut next_start = 0usize;
        let mut index = 0usize;

        let decode_ready = |data: &[f64],
                                n_frames: usize,
                                start_frame: usize,
                                index: usize,
                                stitcher: &mut Stitcher,
                                counts: &mut PrimitiveCounts|
         -> Result<StreamEvent, CliError> {
            let t0 = Instant::now();
            let w = extract_window(data, ch, n_frames, &geom, start_frame, &id);
            let pred = decode_window(ensemble.members(), &w).map_err(runtime)?;
            let new_tokens = stitcher.push(&pred).map_err(runtime)?.to_vec();
            for t in &new_tokens {
                *counts.get_mut(*t) += 1;
            }
            let emitted = start.elapsed().as_secs_f64();
            Ok(StreamEvent {
                recording: id.clone(),
                window: index,
                core_start_s: w.origin.core_start as f64 / recording.sample_rate_hz,
                core_end_s: w.origin.core_end as f64 / recording.sample_rate_hz,
                emitted_s: emitted,
                lag_s: emitted - frame_time(w.origin.core_end),
                compute_s: t0.elapsed().as_secs_f64(),
                new_tokens,
                counts: counts.clone(),
            })
        };

        let mut received = 0usize;
        for chunk in rx.iter() {
            received += chunk.len() / ch;
            raw.extend_from_slice(&chunk);
            if transform.is_none() && received > ref_index {
                let r = &raw[ref_index * ch..(ref_index + 1) * ch];
                transform = Some(SensorCentric::from_reference_frame(manifest, r, ref_index).map_err(runtime)?);
            }
            if let Some(sc) = &transform {
                let first = data.len() / ch;
                for (k, frame) in raw.chunks_exact_mut(ch).enumerate() {
                    sc.apply(frame, first + k).map_err(runtime)?;
                }
                data.append(&mut raw);
            }
            let have = data.len() / ch;
            while next_start < total && have >= next_start + geom.core_len + geom.flank {
                events.push(decode_ready(&data, have, next_start, index, &mut stitcher, &mut counts)?);
                next_start += geom.test_slide;
                index += 1;
            }
        }
        producer.join().map_err(|_| CliError::Runtime("frame producer panicked".into()))?;

        let have = data.len() / ch;
        if have != total {
            return Err(CliError::Runtime(format!("stream delivered {have} of {total} frames")));
        }
        for s in core_starts(total, &geom, WindowMode::Test).into_iter().skip(index) {
            events.push(decode_ready(&data, total, s, index, &mut stitcher, &mut counts)?);
            index += 1;
        }

        let session = stitcher.finish().map_err(runtime)?;
        let lags: Vec<f64> = events.iter().map(|e| e.lag_s).collect();
        let compute: Vec<f64> = events.iter().map(|e| e.compute_s).collect();
        let max = |v: &[f64]| v.iter().copied().fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.max(x))));
        let lag = LagReport {
            speed,
            max_lag_s: max(&lags).unwrap_or(0.0),
            max_lag_except_final_s: max(&lags[..lags.len().saturating_sub(1)]),
            max_compute_s: max(&compute).unwrap_or(0.0),
            mean_compute_s: if compute.is_empty() { 0.0 } else { compute.iter().sum::<f64>() / compute.len() as f64 },
            lags_s: lags,
        };
        Ok(StreamOutcome { events, session, counts, lag })
    })
}
