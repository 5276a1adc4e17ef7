//! Deterministic synthetic recordings with known ground truth.
//!
//! Every class owns a clean per-channel signature: a constant offset plus a
//! sinusoid at a class-specific frequency, timed from the segment start.
//! Quaternion groups rotate about a class-specific axis by an angle that
//! follows the same pattern. Gaussian noise and a per-subject channel offset
//! sit on top. Each recording also sees every sensor through a random
//! mounting rotation, and its first frame is a noise-free calibration pose,
//! so re-referencing orientations to that frame removes the mounting.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::preprocess::Quaternion;

use super::{
    ChannelManifest, Dataset, DatasetError, ImuRecording, LabeledRecording, PareticSide,
    PrimitiveClass, PrimitiveSegment, QuantityKind, Result, SubjectInfo,
};

/// Shortest segment the scheduler emits, in frames.
pub const MIN_SEGMENT_FRAMES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DurationRange {
    pub min_s: f64,
    pub max_s: f64,
}

impl DurationRange {
    pub const fn new(min_s: f64, max_s: f64) -> Self {
        Self { min_s, max_s }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SignatureParams {
    /// Per-channel class offsets are drawn from `[-offset_scale, offset_scale]`.
    pub offset_scale: f64,
    pub amplitude: f64,
    pub freq_min_hz: f64,
    pub freq_max_hz: f64,
    /// Base rotation angles (radians) are drawn from `[-a, a]`.
    pub quat_angle_scale: f64,
    pub quat_amplitude: f64,
}

impl Default for SignatureParams {
    fn default() -> Self {
        Self {
            offset_scale: 1.0,
            amplitude: 0.5,
            freq_min_hz: 0.5,
            freq_max_hz: 2.0,
            quat_angle_scale: 1.0,
            quat_amplitude: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub n_subjects: usize,
    pub trials_per_subject: usize,
    pub duration_s: f64,
    pub sample_rate_hz: f64,
    /// Cycled over trials.
    pub activities: Vec<String>,
    /// Indexed by class code.
    pub duration_ranges_s: [DurationRange; 5],
    pub signature: SignatureParams,
    pub noise_std: f64,
    /// Std of the per-subject offset added to every non-quaternion channel.
    pub subject_jitter: f64,
    /// Mounting rotations turn by an angle drawn from `[0, mount_angle_max]`
    /// radians about a random axis.
    #[serde(default = "default_mount_angle")]
    pub mount_angle_max: f64,
}

fn default_mount_angle() -> f64 {
    PI
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_subjects: 12,
            trials_per_subject: 2,
            duration_s: 60.0,
            sample_rate_hz: 100.0,
            activities: vec!["shelf".into(), "tabletop".into()],
            duration_ranges_s: [
                DurationRange::new(0.8, 1.6),
                DurationRange::new(0.8, 1.6),
                DurationRange::new(1.0, 2.0),
                DurationRange::new(0.8, 1.6),
                DurationRange::new(0.8, 2.0),
            ],
            signature: SignatureParams::default(),
            noise_std: 0.3,
            subject_jitter: 0.1,
            mount_angle_max: PI,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(DatasetError::DegenerateSpec(m.to_string()));
        if self.n_subjects == 0 {
            return bad("n_subjects must be positive");
        }
        if self.trials_per_subject == 0 {
            return bad("trials_per_subject must be positive");
        }
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return bad("duration_s must be positive");
        }
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return bad("sample_rate_hz must be positive");
        }
        if self.n_frames() == 0 {
            return bad("duration shorter than one frame");
        }
        if self.activities.is_empty() {
            return bad("at least one activity is required");
        }
        for (r, class) in self.duration_ranges_s.iter().zip(PrimitiveClass::ALL) {
            if !(r.min_s > 0.0 && r.max_s >= r.min_s && r.max_s.is_finite()) {
                return Err(DatasetError::DegenerateSpec(format!(
                    "duration range for {class} must satisfy 0 < min <= max"
                )));
            }
        }
        let s = &self.signature;
        if !(s.freq_min_hz >= 0.0 && s.freq_max_hz >= s.freq_min_hz) {
            return bad("signature frequency range is invalid");
        }
        if !(self.noise_std >= 0.0 && self.subject_jitter >= 0.0 && self.mount_angle_max >= 0.0) {
            return bad("noise parameters must be non-negative");
        }
        Ok(())
    }

    pub fn n_frames(&self) -> usize {
        (self.duration_s * self.sample_rate_hz).round() as usize
    }

    pub fn n_recordings(&self) -> usize {
        self.n_subjects * self.trials_per_subject
    }
}

/// Clean per-class channel signatures shared by every subject.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassSignatures {
    channel_kinds: Vec<QuantityKind>,
    quat_groups: Vec<usize>,
    freq_hz: [f64; 5],
    offset: Vec<Vec<f64>>,
    phase: Vec<Vec<f64>>,
    quat_axis: Vec<Vec<[f64; 3]>>,
    quat_base: Vec<Vec<f64>>,
    amplitude: f64,
    quat_amplitude: f64,
}

impl ClassSignatures {
    fn draw(params: &SignatureParams, manifest: &ChannelManifest, rng: &mut ChaCha8Rng) -> Self {
        let ch = manifest.channel_count();
        let groups = manifest.quaternion_groups();
        let mut freq_hz = [0.0; 5];
        let mut offset = Vec::with_capacity(5);
        let mut phase = Vec::with_capacity(5);
        let mut quat_axis = Vec::with_capacity(5);
        let mut quat_base = Vec::with_capacity(5);
        for f in freq_hz.iter_mut() {
            *f = params.freq_min_hz + (params.freq_max_hz - params.freq_min_hz) * rng.gen::<f64>();
            offset.push(
                (0..ch)
                    .map(|_| params.offset_scale * (2.0 * rng.gen::<f64>() - 1.0))
                    .collect::<Vec<_>>(),
            );
            phase.push((0..ch).map(|_| 2.0 * PI * rng.gen::<f64>()).collect::<Vec<_>>());
            quat_axis.push(
                groups
                    .iter()
                    .map(|_| random_unit_vector(rng))
                    .collect::<Vec<_>>(),
            );
            quat_base.push(
                groups
                    .iter()
                    .map(|_| params.quat_angle_scale * (2.0 * rng.gen::<f64>() - 1.0))
                    .collect::<Vec<_>>(),
            );
        }
        Self {
            channel_kinds: manifest.channels().iter().map(|c| c.kind).collect(),
            quat_groups: groups,
            freq_hz,
            offset,
            phase,
            quat_axis,
            quat_base,
            amplitude: params.amplitude,
            quat_amplitude: params.quat_amplitude,
        }
    }

    /// Writes the noiseless frame of `class` at `tau` seconds into its
    /// segment. `subject_offset` is added to non-quaternion channels.
    pub fn clean_frame(&self, class: PrimitiveClass, tau: f64, subject_offset: &[f64], out: &mut [f64]) {
        let k = class.code();
        let omega = 2.0 * PI * self.freq_hz[k];
        for (c, kind) in self.channel_kinds.iter().enumerate() {
            if *kind != QuantityKind::QuaternionComponent {
                out[c] = self.offset[k][c]
                    + subject_offset[c]
                    + self.amplitude * (omega * tau + self.phase[k][c]).sin();
            }
        }
        for (g, &start) in self.quat_groups.iter().enumerate() {
            let angle = self.quat_angle(k, g, omega * tau);
            write_axis_angle(&self.quat_axis[k][g], angle, &mut out[start..start + 4]);
        }
    }

    fn quat_angle(&self, k: usize, g: usize, wt: f64) -> f64 {
        let start = self.quat_groups[g];
        self.quat_base[k][g] + self.quat_amplitude * (wt + self.phase[k][start]).sin()
    }
}

fn random_unit_vector(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let v = [
            2.0 * rng.gen::<f64>() - 1.0,
            2.0 * rng.gen::<f64>() - 1.0,
            2.0 * rng.gen::<f64>() - 1.0,
        ];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 0.1 && n <= 1.0 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

fn write_axis_angle(axis: &[f64; 3], angle: f64, out: &mut [f64]) {
    let (s, c) = (angle / 2.0).sin_cos();
    out[0] = c;
    out[1] = s * axis[0];
    out[2] = s * axis[1];
    out[3] = s * axis[2];
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const SIGNATURE_STREAM: u64 = 0;
const SUBJECT_STREAM: u64 = 1;

/// RNG driving the segment scheduler of recording `index` (subject-major,
/// trial-minor order).
pub fn scheduler_rng(seed: u64, index: usize) -> ChaCha8Rng {
    stream_rng(seed, 1000 + 2 * index as u64)
}

fn noise_rng(seed: u64, index: usize) -> ChaCha8Rng {
    stream_rng(seed, 1001 + 2 * index as u64)
}

fn mount_rng(seed: u64, index: usize) -> ChaCha8Rng {
    stream_rng(seed, (1 << 32) + index as u64)
}

/// One mounting rotation per quaternion group of recording `index`.
fn mount_rotations(spec: &SynthSpec, n_groups: usize, seed: u64, index: usize) -> Vec<Quaternion> {
    let mut rng = mount_rng(seed, index);
    (0..n_groups)
        .map(|_| {
            let axis = random_unit_vector(&mut rng);
            let angle = spec.mount_angle_max * rng.gen::<f64>();
            Quaternion::from_axis_angle(axis, angle).unwrap_or(Quaternion::IDENTITY)
        })
        .collect()
}

pub fn class_signatures(spec: &SynthSpec, manifest: &ChannelManifest, seed: u64) -> ClassSignatures {
    ClassSignatures::draw(&spec.signature, manifest, &mut stream_rng(seed, SIGNATURE_STREAM))
}

/// Draws a segment tiling of `n_frames` frames. The first segment is idle
/// (the calibration pose), consecutive segments never share a class, and no
/// segment is shorter than [`MIN_SEGMENT_FRAMES`] unless the whole recording is.
pub fn schedule_segments(spec: &SynthSpec, n_frames: usize, rng: &mut ChaCha8Rng) -> Vec<PrimitiveSegment> {
    let mut segments = Vec::new();
    let mut cursor = 0usize;
    let mut prev: Option<PrimitiveClass> = None;
    while cursor < n_frames {
        let class = match prev {
            None => PrimitiveClass::Idle,
            Some(p) => {
                let choices: Vec<PrimitiveClass> =
                    PrimitiveClass::ALL.iter().copied().filter(|c| *c != p).collect();
                *choices.choose(rng).expect("four alternatives")
            }
        };
        let range = spec.duration_ranges_s[class.code()];
        let lo = ((range.min_s * spec.sample_rate_hz).round() as usize).max(MIN_SEGMENT_FRAMES);
        let hi = ((range.max_s * spec.sample_rate_hz).round() as usize).max(lo);
        let len = rng.gen_range(lo..=hi);
        let mut end = (cursor + len).min(n_frames);
        if n_frames - end < MIN_SEGMENT_FRAMES {
            end = n_frames;
        }
        segments.push(PrimitiveSegment::new(class, cursor, end));
        cursor = end;
        prev = Some(class);
    }
    segments
}

pub fn subject_id(index: usize) -> String {
    format!("s{:02}", index + 1)
}

/// Generates `spec.n_subjects x spec.trials_per_subject` labeled recordings.
/// The output is a pure function of `(spec, manifest, seed)`.
pub fn synthesize_dataset(spec: &SynthSpec, manifest: &ChannelManifest, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let ch = manifest.channel_count();
    let signatures = class_signatures(spec, manifest, seed);
    let n_frames = spec.n_frames();

    let mut subject_rng = stream_rng(seed, SUBJECT_STREAM);
    let mut subjects = Vec::with_capacity(spec.n_subjects);
    let mut offsets = Vec::with_capacity(spec.n_subjects);
    let jitter = Normal::new(0.0, spec.subject_jitter.max(0.0)).expect("valid std");
    for s in 0..spec.n_subjects {
        let side = if subject_rng.gen::<bool>() {
            PareticSide::Left
        } else {
            PareticSide::Right
        };
        let score = subject_rng.gen_range(10..=SubjectInfo::MAX_UE_FMA);
        subjects.push(SubjectInfo::new(subject_id(s), side, score)?);
        let off: Vec<f64> = manifest
            .channels()
            .iter()
            .map(|c| match c.kind {
                QuantityKind::QuaternionComponent => 0.0,
                _ if spec.subject_jitter > 0.0 => jitter.sample(&mut subject_rng),
                _ => 0.0,
            })
            .collect();
        offsets.push(off);
    }

    let noise = Normal::new(0.0, spec.noise_std.max(0.0)).expect("valid std");
    let quat_groups = manifest.quaternion_groups();
    let mut recordings = Vec::with_capacity(spec.n_recordings());
    for s in 0..spec.n_subjects {
        for t in 0..spec.trials_per_subject {
            let index = s * spec.trials_per_subject + t;
            let segments = schedule_segments(spec, n_frames, &mut scheduler_rng(seed, index));
            let mounts = mount_rotations(spec, quat_groups.len(), seed, index);
            let mut rng = noise_rng(seed, index);
            let mut data = vec![0.0; n_frames * ch];
            for seg in &segments {
                let k = seg.class.code();
                let omega = 2.0 * PI * signatures.freq_hz[k];
                for i in seg.start..seg.end {
                    let tau = (i - seg.start) as f64 / spec.sample_rate_hz;
                    let frame = &mut data[i * ch..(i + 1) * ch];
                    signatures.clean_frame(seg.class, tau, &offsets[s], frame);
                    // frame 0 is the calibration pose, held still
                    if spec.noise_std > 0.0 && i > 0 {
                        for (c, v) in frame.iter_mut().enumerate() {
                            if signatures.channel_kinds[c] != QuantityKind::QuaternionComponent {
                                *v += noise.sample(&mut rng);
                            }
                        }
                        for (g, &start) in quat_groups.iter().enumerate() {
                            let angle = signatures.quat_angle(k, g, omega * tau)
                                + noise.sample(&mut rng);
                            write_axis_angle(
                                &signatures.quat_axis[k][g],
                                angle,
                                &mut frame[start..start + 4],
                            );
                        }
                    }
                    if spec.mount_angle_max > 0.0 {
                        for (mount, &start) in mounts.iter().zip(&quat_groups) {
                            let q = Quaternion::from_slice(&frame[start..start + 4]).expect("unit quaternion");
                            frame[start..start + 4].copy_from_slice(&(*mount * q).to_array());
                        }
                    }
                }
            }
            let activity = spec.activities[t % spec.activities.len()].clone();
            let recording =
                ImuRecording::new(subject_id(s), activity, (t + 1) as u32, spec.sample_rate_hz, ch, data)?;
            recordings.push(LabeledRecording::new(recording, segments)?);
        }
    }
    Ok(Dataset {
        manifest: manifest.clone(),
        subjects,
        recordings,
    })
}
