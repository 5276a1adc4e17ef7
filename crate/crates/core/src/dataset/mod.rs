//! Recordings, primitive labels, subjects and splits.
//!
//! A [`LabeledRecording`] couples uniformly sampled multi-channel frames with
//! an ordered tiling of [`PrimitiveSegment`]s. Every constructor validates its
//! invariants, so downstream code can rely on them without re-checking.

mod io;
mod manifest;
mod split;
pub mod synth;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use io::{
    load_dataset, load_recording, load_recording_with_meta, parse_frames_csv, parse_labels_json,
    save_dataset, save_recording, write_frames_csv, Dataset, RecordingMeta,
};
pub use manifest::{ChannelDescriptor, ChannelManifest, QuantityKind};
pub use split::{ensemble_splits, holdout_subjects, split_subjects, DatasetSplit};

pub type Result<T> = std::result::Result<T, DatasetError>;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },
    #[error("dimensionality mismatch at row {row}: expected {expected} channels, found {found}")]
    DimensionMismatch {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("non-finite value at frame {frame}, channel {channel}")]
    NonFinite { frame: usize, channel: usize },
    #[error("empty segment {class} [{start}, {end})")]
    EmptySegment {
        class: PrimitiveClass,
        start: usize,
        end: usize,
    },
    #[error("overlapping segments: segment starting at {start} overlaps previous segment ending at {prev_end}")]
    OverlappingSegments { prev_end: usize, start: usize },
    #[error("gap in segments: frames [{from}, {to}) are unlabeled")]
    SegmentGap { from: usize, to: usize },
    #[error("segment ends at frame {end} but the recording has {n_frames} frames")]
    SegmentOutOfBounds { end: usize, n_frames: usize },
    #[error("invalid channel manifest: {0}")]
    InvalidManifest(String),
    #[error("invalid subject {subject}: {reason}")]
    InvalidSubject { subject: String, reason: String },
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("too few subjects: {found} subjects cannot fill {folds} folds")]
    TooFewSubjects { found: usize, folds: usize },
    #[error("degenerate synthesis spec: {0}")]
    DegenerateSpec(String),
    #[error("invalid recording: {0}")]
    InvalidRecording(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("json error in {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

/// The five functional primitive classes. The discriminant is the stable
/// integer code used in files and confusion matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrimitiveClass {
    Reach = 0,
    Reposition = 1,
    Transport = 2,
    Stabilize = 3,
    Idle = 4,
}

impl PrimitiveClass {
    pub const COUNT: usize = 5;
    pub const ALL: [PrimitiveClass; 5] = [
        PrimitiveClass::Reach,
        PrimitiveClass::Reposition,
        PrimitiveClass::Transport,
        PrimitiveClass::Stabilize,
        PrimitiveClass::Idle,
    ];

    pub fn code(self) -> usize {
        self as usize
    }

    pub fn from_code(code: usize) -> Option<Self> {
        Self::ALL.get(code).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            PrimitiveClass::Reach => "reach",
            PrimitiveClass::Reposition => "reposition",
            PrimitiveClass::Transport => "transport",
            PrimitiveClass::Stabilize => "stabilize",
            PrimitiveClass::Idle => "idle",
        }
    }
}

impl fmt::Display for PrimitiveClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PrimitiveClass {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown primitive class {s:?}"))
    }
}

/// Activity names reserved for the rehabilitation battery. Any other string is
/// a legal activity tag as well.
pub const RESERVED_ACTIVITIES: [&str; 9] = [
    "shelf",
    "tabletop",
    "feeding",
    "drinking",
    "combing",
    "glasses",
    "deodorant",
    "face_washing",
    "tooth_brushing",
];

/// Uniformly sampled multi-channel frames, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ImuRecording {
    pub subject_id: String,
    pub activity: String,
    pub trial: u32,
    pub sample_rate_hz: f64,
    channel_count: usize,
    data: Vec<f64>,
}

impl ImuRecording {
    pub fn new(
        subject_id: impl Into<String>,
        activity: impl Into<String>,
        trial: u32,
        sample_rate_hz: f64,
        channel_count: usize,
        data: Vec<f64>,
    ) -> Result<Self> {
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(DatasetError::InvalidRecording(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        if channel_count == 0 {
            return Err(DatasetError::InvalidRecording(
                "channel count must be positive".into(),
            ));
        }
        if data.len() % channel_count != 0 {
            return Err(DatasetError::DimensionMismatch {
                row: data.len() / channel_count,
                expected: channel_count,
                found: data.len() % channel_count,
            });
        }
        if let Some(idx) = data.iter().position(|v| !v.is_finite()) {
            return Err(DatasetError::NonFinite {
                frame: idx / channel_count,
                channel: idx % channel_count,
            });
        }
        Ok(Self {
            subject_id: subject_id.into(),
            activity: activity.into(),
            trial,
            sample_rate_hz,
            channel_count,
            data,
        })
    }

    /// Stable identifier `<subject>_<activity>_<trial>`.
    pub fn id(&self) -> String {
        format!("{}_{}_{}", self.subject_id, self.activity, self.trial)
    }

    pub fn channel_count(&self) -> usize {
        self.channel_count
    }

    pub fn n_frames(&self) -> usize {
        self.data.len() / self.channel_count
    }

    pub fn duration_s(&self) -> f64 {
        self.n_frames() as f64 / self.sample_rate_hz
    }

    pub fn frame(&self, index: usize) -> &[f64] {
        let c = self.channel_count;
        &self.data[index * c..(index + 1) * c]
    }

    pub fn frames(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.data.chunks_exact(self.channel_count)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Returns a copy carrying the same metadata with replaced values.
    /// `data` must have the same length as the current buffer.
    pub fn with_data(&self, data: Vec<f64>) -> Result<Self> {
        if data.len() != self.data.len() {
            return Err(DatasetError::InvalidRecording(format!(
                "replacement buffer has {} values, expected {}",
                data.len(),
                self.data.len()
            )));
        }
        Self::new(
            self.subject_id.clone(),
            self.activity.clone(),
            self.trial,
            self.sample_rate_hz,
            self.channel_count,
            data,
        )
    }
}

/// A labeled primitive occupying frames `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimitiveSegment {
    pub class: PrimitiveClass,
    pub start: usize,
    pub end: usize,
}

impl PrimitiveSegment {
    pub fn new(class: PrimitiveClass, start: usize, end: usize) -> Self {
        Self { class, start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    /// Number of frames shared with `[start, end)`.
    pub fn overlap(&self, start: usize, end: usize) -> usize {
        let lo = self.start.max(start);
        let hi = self.end.min(end);
        hi.saturating_sub(lo)
    }
}

/// Checks that `segments` are sorted, non-empty, non-overlapping and tile
/// `[0, n_frames)` without gaps.
pub fn validate_tiling(segments: &[PrimitiveSegment], n_frames: usize) -> Result<()> {
    let mut cursor = 0usize;
    for seg in segments {
        if seg.is_empty() {
            return Err(DatasetError::EmptySegment {
                class: seg.class,
                start: seg.start,
                end: seg.end,
            });
        }
        if seg.start < cursor {
            return Err(DatasetError::OverlappingSegments {
                prev_end: cursor,
                start: seg.start,
            });
        }
        if seg.start > cursor {
            return Err(DatasetError::SegmentGap {
                from: cursor,
                to: seg.start,
            });
        }
        if seg.end > n_frames {
            return Err(DatasetError::SegmentOutOfBounds {
                end: seg.end,
                n_frames,
            });
        }
        cursor = seg.end;
    }
    if cursor != n_frames {
        return Err(DatasetError::SegmentGap {
            from: cursor,
            to: n_frames,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledRecording {
    pub recording: ImuRecording,
    segments: Vec<PrimitiveSegment>,
}

impl LabeledRecording {
    pub fn new(recording: ImuRecording, segments: Vec<PrimitiveSegment>) -> Result<Self> {
        validate_tiling(&segments, recording.n_frames())?;
        Ok(Self {
            recording,
            segments,
        })
    }

    pub fn segments(&self) -> &[PrimitiveSegment] {
        &self.segments
    }

    pub fn id(&self) -> String {
        self.recording.id()
    }

    /// Ground-truth token sequence: one token per segment.
    pub fn token_sequence(&self) -> Vec<PrimitiveClass> {
        self.segments.iter().map(|s| s.class).collect()
    }

    /// Replaces the frames while keeping the labels.
    pub fn with_recording(&self, recording: ImuRecording) -> Result<Self> {
        Self::new(recording, self.segments.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PareticSide {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSubjectInfo")]
pub struct SubjectInfo {
    pub subject_id: String,
    pub paretic_side: PareticSide,
    pub ue_fma_score: u8,
}

#[derive(Deserialize)]
struct RawSubjectInfo {
    subject_id: String,
    paretic_side: PareticSide,
    ue_fma_score: u8,
}

impl TryFrom<RawSubjectInfo> for SubjectInfo {
    type Error = DatasetError;

    fn try_from(raw: RawSubjectInfo) -> Result<Self> {
        SubjectInfo::new(raw.subject_id, raw.paretic_side, raw.ue_fma_score)
    }
}

impl SubjectInfo {
    /// Upper bound of the Fugl-Meyer upper-extremity score.
    pub const MAX_UE_FMA: u8 = 66;

    pub fn new(
        subject_id: impl Into<String>,
        paretic_side: PareticSide,
        ue_fma_score: u8,
    ) -> Result<Self> {
        let subject_id = subject_id.into();
        if ue_fma_score > Self::MAX_UE_FMA {
            return Err(DatasetError::InvalidSubject {
                subject: subject_id,
                reason: format!("UE-FMA score {ue_fma_score} exceeds 66"),
            });
        }
        Ok(Self {
            subject_id,
            paretic_side,
            ue_fma_score,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(n: usize) -> ImuRecording {
        ImuRecording::new("s01", "shelf", 1, 100.0, 2, vec![0.0; n * 2]).unwrap()
    }

    #[test]
    fn class_codes_are_stable() {
        for (i, c) in PrimitiveClass::ALL.iter().enumerate() {
            assert_eq!(c.code(), i);
            assert_eq!(PrimitiveClass::from_code(i), Some(*c));
            assert_eq!(c.name().parse::<PrimitiveClass>().unwrap(), *c);
        }
        assert_eq!(PrimitiveClass::from_code(5), None);
        assert!("walk".parse::<PrimitiveClass>().is_err());
    }

    #[test]
    fn tiling_accepts_contiguous_segments() {
        use PrimitiveClass::*;
        let segs = vec![
            PrimitiveSegment::new(Idle, 0, 100),
            PrimitiveSegment::new(Reach, 100, 300),
            PrimitiveSegment::new(Idle, 300, 600),
        ];
        let lr = LabeledRecording::new(rec(600), segs).unwrap();
        assert_eq!(lr.segments().len(), 3);
        assert_eq!(lr.segments().iter().map(|s| s.len()).sum::<usize>(), 600);
    }

    #[test]
    fn tiling_rejects_overlap_gap_and_overflow() {
        use PrimitiveClass::*;
        let err = validate_tiling(
            &[
                PrimitiveSegment::new(Reach, 0, 300),
                PrimitiveSegment::new(Idle, 250, 600),
            ],
            600,
        )
        .unwrap_err();
        assert!(err.to_string().contains("overlapping segments"), "{err}");

        let err = validate_tiling(
            &[
                PrimitiveSegment::new(Reach, 0, 300),
                PrimitiveSegment::new(Idle, 310, 600),
            ],
            600,
        )
        .unwrap_err();
        assert!(matches!(err, DatasetError::SegmentGap { from: 300, to: 310 }));

        let err = validate_tiling(&[PrimitiveSegment::new(Reach, 0, 601)], 600).unwrap_err();
        assert!(matches!(err, DatasetError::SegmentOutOfBounds { .. }));

        let err = validate_tiling(&[PrimitiveSegment::new(Reach, 0, 500)], 600).unwrap_err();
        assert!(matches!(err, DatasetError::SegmentGap { from: 500, to: 600 }));

        let err = validate_tiling(&[PrimitiveSegment::new(Reach, 5, 5)], 600).unwrap_err();
        assert!(matches!(err, DatasetError::EmptySegment { .. }));
    }

    #[test]
    fn recording_rejects_non_finite() {
        let err = ImuRecording::new("s", "a", 0, 100.0, 2, vec![0.0, 1.0, f64::NAN, 0.0])
            .unwrap_err();
        assert!(matches!(err, DatasetError::NonFinite { frame: 1, channel: 0 }));
    }

    #[test]
    fn subject_score_bounds() {
        assert!(SubjectInfo::new("s", PareticSide::Left, 66).is_ok());
        assert!(SubjectInfo::new("s", PareticSide::Left, 67).is_err());
        let bad = r#"{"subject_id":"s","paretic_side":"right","ue_fma_score":70}"#;
        assert!(serde_json::from_str::<SubjectInfo>(bad).is_err());
    }

    #[test]
    fn segment_overlap() {
        let s = PrimitiveSegment::new(PrimitiveClass::Reach, 10, 20);
        assert_eq!(s.overlap(0, 15), 5);
        assert_eq!(s.overlap(20, 30), 0);
        assert_eq!(s.overlap(0, 100), 10);
    }
}
