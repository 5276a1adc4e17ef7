//! On-disk formats: frames CSV, labels JSON, per-recording metadata and the
//! dataset directory layout.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    ChannelManifest, DatasetError, ImuRecording, LabeledRecording, PrimitiveSegment, Result,
    SubjectInfo,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingMeta {
    pub subject_id: String,
    pub activity: String,
    pub trial: u32,
    pub sample_rate_hz: f64,
}

/// A manifest, its subjects and their labeled recordings.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: ChannelManifest,
    pub subjects: Vec<SubjectInfo>,
    pub recordings: Vec<LabeledRecording>,
}

impl Dataset {
    pub fn subject_ids(&self) -> Vec<String> {
        self.subjects.iter().map(|s| s.subject_id.clone()).collect()
    }

    pub fn subject(&self, id: &str) -> Option<&SubjectInfo> {
        self.subjects.iter().find(|s| s.subject_id == id)
    }

    pub fn recordings_of<'a>(
        &'a self,
        subjects: &'a std::collections::BTreeSet<String>,
    ) -> impl Iterator<Item = &'a LabeledRecording> + 'a {
        self.recordings
            .iter()
            .filter(move |r| subjects.contains(&r.recording.subject_id))
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn json_err(path: &Path) -> impl FnOnce(serde_json::Error) -> DatasetError + '_ {
    move |source| DatasetError::Json {
        path: path.display().to_string(),
        source,
    }
}

/// Parses a frames CSV (`t,<channel names>` header) into a row-major buffer.
/// The `t` column is checked for being numeric but otherwise ignored: frame
/// spacing is implied by the sample rate.
pub fn parse_frames_csv<R: Read>(
    reader: R,
    manifest: &ChannelManifest,
    source_name: &str,
) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| DatasetError::Parse {
        location: format!("{source_name}: header"),
        message: e.to_string(),
    })?;
    if header.get(0) != Some("t") {
        return Err(DatasetError::Parse {
            location: format!("{source_name}: header"),
            message: "first column must be `t`".into(),
        });
    }
    let expected = manifest.channel_count();
    if header.len() != expected + 1 {
        return Err(DatasetError::DimensionMismatch {
            row: 0,
            expected,
            found: header.len().saturating_sub(1),
        });
    }
    for (i, (got, want)) in header.iter().skip(1).zip(manifest.names()).enumerate() {
        if got != want {
            return Err(DatasetError::Parse {
                location: format!("{source_name}: header column {}", i + 1),
                message: format!("expected channel {want:?}, found {got:?}"),
            });
        }
    }

    let mut data = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| DatasetError::Parse {
            location: format!("{source_name}: row {row}"),
            message: e.to_string(),
        })?;
        if record.len() != expected + 1 {
            return Err(DatasetError::DimensionMismatch {
                row,
                expected,
                found: record.len().saturating_sub(1),
            });
        }
        for (col, field) in record.iter().enumerate() {
            let value: f64 = field.trim().parse().map_err(|_| DatasetError::Parse {
                location: format!("{source_name}: row {row}, column {col}"),
                message: format!("malformed number {field:?}"),
            })?;
            if !value.is_finite() {
                return Err(DatasetError::NonFinite {
                    frame: row,
                    channel: col.saturating_sub(1),
                });
            }
            if col > 0 {
                data.push(value);
            }
        }
    }
    Ok(data)
}

/// Writes frames with the shortest representation that round-trips exactly.
pub fn write_frames_csv<W: Write>(
    writer: W,
    recording: &ImuRecording,
    manifest: &ChannelManifest,
) -> std::io::Result<()> {
    let mut w = BufWriter::new(writer);
    write!(w, "t")?;
    for name in manifest.names() {
        write!(w, ",{name}")?;
    }
    writeln!(w)?;
    for (i, frame) in recording.frames().enumerate() {
        write!(w, "{}", i as f64 / recording.sample_rate_hz)?;
        for v in frame {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    w.flush()
}

pub fn parse_labels_json(text: &str, source_name: &str) -> Result<Vec<PrimitiveSegment>> {
    serde_json::from_str(text).map_err(|e| DatasetError::Parse {
        location: source_name.to_string(),
        message: e.to_string(),
    })
}

fn meta_path_for(labels_path: &Path) -> PathBuf {
    let name = labels_path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let stem = name.strip_suffix(".labels.json").unwrap_or(&name);
    labels_path.with_file_name(format!("{stem}.meta.json"))
}

/// Loads `<id>.frames.csv` and `<id>.labels.json`; metadata is read from the
/// sibling `<id>.meta.json`.
pub fn load_recording(
    frames_path: &Path,
    labels_path: &Path,
    manifest: &ChannelManifest,
) -> Result<LabeledRecording> {
    let meta_path = meta_path_for(labels_path);
    load_recording_with_meta(frames_path, labels_path, &meta_path, manifest)
}

pub fn load_recording_with_meta(
    frames_path: &Path,
    labels_path: &Path,
    meta_path: &Path,
    manifest: &ChannelManifest,
) -> Result<LabeledRecording> {
    let meta_text = fs::read_to_string(meta_path).map_err(io_err(meta_path))?;
    let meta: RecordingMeta = serde_json::from_str(&meta_text).map_err(json_err(meta_path))?;

    let file = fs::File::open(frames_path).map_err(io_err(frames_path))?;
    let data = parse_frames_csv(file, manifest, &frames_path.display().to_string())?;

    let labels_text = fs::read_to_string(labels_path).map_err(io_err(labels_path))?;
    let segments = parse_labels_json(&labels_text, &labels_path.display().to_string())?;

    let recording = ImuRecording::new(
        meta.subject_id,
        meta.activity,
        meta.trial,
        meta.sample_rate_hz,
        manifest.channel_count(),
        data,
    )?;
    LabeledRecording::new(recording, segments)
}

pub fn save_recording(dir: &Path, rec: &LabeledRecording, manifest: &ChannelManifest) -> Result<()> {
    let id = rec.id();
    let frames_path = dir.join(format!("{id}.frames.csv"));
    let file = fs::File::create(&frames_path).map_err(io_err(&frames_path))?;
    write_frames_csv(file, &rec.recording, manifest).map_err(io_err(&frames_path))?;

    let labels_path = dir.join(format!("{id}.labels.json"));
    let labels = serde_json::to_string_pretty(rec.segments()).expect("segments serialize");
    fs::write(&labels_path, labels).map_err(io_err(&labels_path))?;

    let meta = RecordingMeta {
        subject_id: rec.recording.subject_id.clone(),
        activity: rec.recording.activity.clone(),
        trial: rec.recording.trial,
        sample_rate_hz: rec.recording.sample_rate_hz,
    };
    let meta_path = dir.join(format!("{id}.meta.json"));
    let text = serde_json::to_string_pretty(&meta).expect("meta serializes");
    fs::write(&meta_path, text).map_err(io_err(&meta_path))?;
    Ok(())
}

/// Layout: `manifest.json`, `subjects.json`, `index.json` (recording ids in
/// order) and `recordings/<id>.{frames.csv,labels.json,meta.json}`.
pub fn save_dataset(dir: &Path, dataset: &Dataset) -> Result<()> {
    let rec_dir = dir.join("recordings");
    fs::create_dir_all(&rec_dir).map_err(io_err(&rec_dir))?;
    dataset.manifest.save(&dir.join("manifest.json"))?;

    let subjects_path = dir.join("subjects.json");
    let text = serde_json::to_string_pretty(&dataset.subjects).expect("subjects serialize");
    fs::write(&subjects_path, text).map_err(io_err(&subjects_path))?;

    let ids: Vec<String> = dataset.recordings.iter().map(|r| r.id()).collect();
    let index_path = dir.join("index.json");
    let text = serde_json::to_string_pretty(&ids).expect("index serializes");
    fs::write(&index_path, text).map_err(io_err(&index_path))?;

    for rec in &dataset.recordings {
        save_recording(&rec_dir, rec, &dataset.manifest)?;
    }
    Ok(())
}

pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let manifest = ChannelManifest::load(&dir.join("manifest.json"))?;

    let subjects_path = dir.join("subjects.json");
    let text = fs::read_to_string(&subjects_path).map_err(io_err(&subjects_path))?;
    let subjects: Vec<SubjectInfo> =
        serde_json::from_str(&text).map_err(json_err(&subjects_path))?;

    let index_path = dir.join("index.json");
    let text = fs::read_to_string(&index_path).map_err(io_err(&index_path))?;
    let ids: Vec<String> = serde_json::from_str(&text).map_err(json_err(&index_path))?;

    let rec_dir = dir.join("recordings");
    let mut recordings = Vec::with_capacity(ids.len());
    for id in ids {
        let rec = load_recording(
            &rec_dir.join(format!("{id}.frames.csv")),
            &rec_dir.join(format!("{id}.labels.json")),
            &manifest,
        )?;
        if !subjects
            .iter()
            .any(|s| s.subject_id == rec.recording.subject_id)
        {
            return Err(DatasetError::InvalidSubject {
                subject: rec.recording.subject_id.clone(),
                reason: format!("recording {id} references an unknown subject"),
            });
        }
        recordings.push(rec);
    }
    Ok(Dataset {
        manifest,
        subjects,
        recordings,
    })
}
