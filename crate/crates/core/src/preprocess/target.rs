use serde::{Deserialize, Serialize};

use super::WindowOrigin;
use crate::dataset::{PrimitiveClass, PrimitiveSegment};

/// 50 ms at 100 Hz.
pub const DEFAULT_MIN_OVERLAP_FRAMES: usize = 5;
pub const DEFAULT_MAX_TOKENS: usize = 16;

/// Ordered primitive tokens of one window's core.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TargetSequence(pub Vec<PrimitiveClass>);

impl TargetSequence {
    pub fn tokens(&self) -> &[PrimitiveClass] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// One token per segment overlapping the core by at least `min_overlap`
/// frames, in temporal order. Falls back to the single largest-overlap
/// segment when the threshold removes everything. Truncated to `max_tokens`.
pub fn derive_target_sequence(
    segments: &[PrimitiveSegment],
    core: &WindowOrigin,
    min_overlap: usize,
    max_tokens: usize,
) -> TargetSequence {
    let first = segments.partition_point(|s| s.end <= core.core_start);
    let mut tokens = Vec::new();
    let mut best: Option<(usize, PrimitiveClass)> = None;
    for seg in segments[first..]
        .iter()
        .take_while(|s| s.start < core.core_end)
    {
        let ov = seg.overlap(core.core_start, core.core_end);
        if ov >= min_overlap {
            tokens.push(seg.class);
        }
        if best.map_or(true, |(b, _)| ov > b) {
            best = Some((ov, seg.class));
        }
    }
    if tokens.is_empty() {
        if let Some((_, class)) = best {
            tokens.push(class);
        }
    }
    tokens.truncate(max_tokens);
    TargetSequence(tokens)
}
