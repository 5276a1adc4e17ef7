use serde::{Deserialize, Serialize};

use super::{DecodeError, Result, WindowPrediction};
use crate::dataset::PrimitiveClass;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionPrediction {
    pub recording: String,
    pub sequence: Vec<PrimitiveClass>,
}

/// Incremental boundary merge over windows arriving in core-start order.
/// A window whose first token equals the running sequence's last token has
/// that token dropped.
#[derive(Debug, Clone, Default)]
pub struct Stitcher {
    recording: Option<String>,
    last_core_start: Option<usize>,
    sequence: Vec<PrimitiveClass>,
    merges: usize,
}

impl Stitcher {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends one window and returns the tokens it contributed.
    pub fn push(&mut self, window: &WindowPrediction) -> Result<&[PrimitiveClass]> {
        match &self.recording {
            Some(r) if *r != window.origin.recording => {
                return Err(DecodeError::MixedRecordings {
                    expected: r.clone(),
                    found: window.origin.recording.clone(),
                })
            }
            None => self.recording = Some(window.origin.recording.clone()),
            _ => {}
        }
        if let Some(prev) = self.last_core_start {
            if window.origin.core_start <= prev {
                return Err(DecodeError::Unsorted { previous: prev, next: window.origin.core_start });
            }
        }
        self.last_core_start = Some(window.origin.core_start);

        let before = self.sequence.len();
        let mut tokens = window.tokens.as_slice();
        if let (Some(last), Some(first)) = (self.sequence.last(), tokens.first()) {
            if last == first {
                tokens = &tokens[1..];
                self.merges += 1;
            }
        }
        self.sequence.extend_from_slice(tokens);
        Ok(&self.sequence[before..])
    }

    pub fn sequence(&self) -> &[PrimitiveClass] {
        &self.sequence
    }

    pub fn merges(&self) -> usize {
        self.merges
    }

    pub fn finish(self) -> Result<SessionPrediction> {
        let recording = self.recording.ok_or(DecodeError::EmptyInput)?;
        Ok(SessionPrediction { recording, sequence: self.sequence })
    }
}

pub fn stitch_windows(predictions: &[WindowPrediction]) -> Result<SessionPrediction> {
    let mut s = Stitcher::new();
    for p in predictions {
        s.push(p)?;
    }
    s.finish()
}
