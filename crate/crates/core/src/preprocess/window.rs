use serde::{Deserialize, Serialize};

use super::{PreprocessError, Result};
use crate::dataset::ImuRecording;

/// Window timing in seconds. The core sits centered in the window with equal
/// flanks on both sides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowSpec {
    pub window_s: f64,
    pub core_s: f64,
    pub train_slide_s: f64,
    pub test_slide_s: f64,
    pub sample_rate_hz: f64,
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self {
            window_s: 6.0,
            core_s: 4.0,
            train_slide_s: 0.5,
            test_slide_s: 4.0,
            sample_rate_hz: 100.0,
        }
    }
}

/// [`WindowSpec`] converted to frame counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowGeometry {
    pub window_len: usize,
    pub core_len: usize,
    pub flank: usize,
    pub train_slide: usize,
    pub test_slide: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowMode {
    Train,
    Test,
}

fn whole_frames(seconds: f64, rate: f64, what: &str) -> Result<usize> {
    let frames = seconds * rate;
    let rounded = frames.round();
    if !(frames.is_finite() && (frames - rounded).abs() < 1e-9 && rounded >= 0.0) {
        return Err(PreprocessError::InvalidWindowSpec(format!(
            "{what} = {seconds} s is not a whole number of frames at {rate} Hz"
        )));
    }
    Ok(rounded as usize)
}

impl WindowSpec {
    pub fn geometry(&self) -> Result<WindowGeometry> {
        let bad = |m: String| Err(PreprocessError::InvalidWindowSpec(m));
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return bad(format!("sample rate {} must be positive", self.sample_rate_hz));
        }
        let rate = self.sample_rate_hz;
        let window_len = whole_frames(self.window_s, rate, "window_s")?;
        let core_len = whole_frames(self.core_s, rate, "core_s")?;
        let train_slide = whole_frames(self.train_slide_s, rate, "train_slide_s")?;
        let test_slide = whole_frames(self.test_slide_s, rate, "test_slide_s")?;
        if core_len == 0 || train_slide == 0 {
            return bad("core and slides must be at least one frame".into());
        }
        if core_len > window_len {
            return bad(format!("core ({core_len} frames) exceeds window ({window_len} frames)"));
        }
        if (window_len - core_len) % 2 != 0 {
            return bad("window minus core must split into two equal flanks".into());
        }
        if test_slide != core_len {
            return bad(format!(
                "test slide ({test_slide} frames) must equal the core ({core_len} frames) so cores tile the recording"
            ));
        }
        Ok(WindowGeometry {
            window_len,
            core_len,
            flank: (window_len - core_len) / 2,
            train_slide,
            test_slide,
        })
    }

    pub fn flank_s(&self) -> f64 {
        (self.window_s - self.core_s) / 2.0
    }
}

/// Where a window's core lies in its source recording, `[core_start, core_end)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct WindowOrigin {
    pub recording: String,
    pub core_start: usize,
    pub core_end: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    /// `window_len x channel_count`, row-major.
    pub frames: Vec<f64>,
    pub channel_count: usize,
    /// Core bounds relative to the window's first frame.
    pub core_start: usize,
    pub core_end: usize,
    pub origin: WindowOrigin,
}

impl Window {
    pub fn window_len(&self) -> usize {
        self.frames.len() / self.channel_count
    }
}

/// Absolute core start frames for a recording of `n_frames` frames.
pub fn core_starts(n_frames: usize, geom: &WindowGeometry, mode: WindowMode) -> Vec<usize> {
    if n_frames == 0 {
        return Vec::new();
    }
    match mode {
        WindowMode::Test => (0..n_frames).step_by(geom.test_slide).collect(),
        WindowMode::Train => {
            if n_frames <= geom.core_len {
                return vec![0];
            }
            let steps = (n_frames - geom.core_len).div_ceil(geom.train_slide);
            (0..=steps).map(|k| k * geom.train_slide).collect()
        }
    }
}

/// Cuts the window whose core starts at `core_start`. Frames outside
/// `[0, n_frames)` repeat the nearest boundary frame. Only frames inside the
/// returned window's span are read, so `data` may hold a prefix of the
/// recording as long as it covers that span (or the recording has ended).
pub fn extract_window(
    data: &[f64],
    channel_count: usize,
    n_frames: usize,
    geom: &WindowGeometry,
    core_start: usize,
    recording: &str,
) -> Window {
    let first = core_start as isize - geom.flank as isize;
    let mut frames = Vec::with_capacity(geom.window_len * channel_count);
    for k in 0..geom.window_len {
        let idx = (first + k as isize).clamp(0, n_frames as isize - 1) as usize;
        frames.extend_from_slice(&data[idx * channel_count..(idx + 1) * channel_count]);
    }
    let core_end = (core_start + geom.core_len).min(n_frames);
    Window {
        frames,
        channel_count,
        core_start: geom.flank,
        core_end: geom.flank + (core_end - core_start),
        origin: WindowOrigin {
            recording: recording.to_string(),
            core_start,
            core_end,
        },
    }
}

/// Slides windows over the recording. Cores start at frame 0; in test mode
/// they tile the recording exactly, the last one truncated at the end.
pub fn make_windows(recording: &ImuRecording, spec: &WindowSpec, mode: WindowMode) -> Result<Vec<Window>> {
    let geom = spec.geometry()?;
    let n = recording.n_frames();
    if n == 0 {
        return Err(PreprocessError::EmptyRecording);
    }
    let id = recording.id();
    Ok(core_starts(n, &geom, mode)
        .into_iter()
        .map(|s| extract_window(recording.data(), recording.channel_count(), n, &geom, s, &id))
        .collect())
}
