use std::io::Write;

use serde::{Deserialize, Serialize};

use super::stitch::SessionPrediction;
use super::Result;
use crate::dataset::PrimitiveClass;

/// Per-class tallies of a token sequence.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimitiveCounts {
    pub reach: u64,
    pub reposition: u64,
    pub transport: u64,
    pub stabilize: u64,
    pub idle: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub activity: Option<String>,
}

impl PrimitiveCounts {
    pub fn from_tokens(tokens: &[PrimitiveClass]) -> Self {
        let mut c = Self::default();
        for &t in tokens {
            *c.get_mut(t) += 1;
        }
        c
    }

    pub fn with_activity(mut self, activity: impl Into<String>) -> Self {
        self.activity = Some(activity.into());
        self
    }

    pub fn get(&self, class: PrimitiveClass) -> u64 {
        match class {
            PrimitiveClass::Reach => self.reach,
            PrimitiveClass::Reposition => self.reposition,
            PrimitiveClass::Transport => self.transport,
            PrimitiveClass::Stabilize => self.stabilize,
            PrimitiveClass::Idle => self.idle,
        }
    }

    pub fn get_mut(&mut self, class: PrimitiveClass) -> &mut u64 {
        match class {
            PrimitiveClass::Reach => &mut self.reach,
            PrimitiveClass::Reposition => &mut self.reposition,
            PrimitiveClass::Transport => &mut self.transport,
            PrimitiveClass::Stabilize => &mut self.stabilize,
            PrimitiveClass::Idle => &mut self.idle,
        }
    }

    pub fn total(&self) -> u64 {
        PrimitiveClass::ALL.iter().map(|&c| self.get(c)).sum()
    }

    /// Adds another table's counts; the activity tag is kept only if both agree.
    pub fn add(&mut self, other: &PrimitiveCounts) {
        for c in PrimitiveClass::ALL {
            *self.get_mut(c) += other.get(c);
        }
        if self.activity != other.activity {
            self.activity = None;
        }
    }
}

pub fn count(session: &SessionPrediction) -> PrimitiveCounts {
    PrimitiveCounts::from_tokens(&session.sequence)
}

/// Serialized form of a stitched session with its counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionReport {
    pub recording: String,
    pub sequence: Vec<PrimitiveClass>,
    pub counts: PrimitiveCounts,
}

impl SessionReport {
    pub fn new(session: SessionPrediction, activity: Option<&str>) -> Self {
        let mut counts = count(&session);
        counts.activity = activity.map(str::to_string);
        Self { recording: session.recording, sequence: session.sequence, counts }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassCountingError {
    pub true_count: u64,
    pub predicted_count: u64,
    /// `100 * (true - predicted) / true`; `None` when the true count is 0.
    /// Positive values are undercounts.
    pub error_pct: Option<f64>,
}

impl ClassCountingError {
    fn new(true_count: u64, predicted_count: u64) -> Self {
        let error_pct = (true_count > 0)
            .then(|| 100.0 * (true_count as f64 - predicted_count as f64) / true_count as f64);
        Self { true_count, predicted_count, error_pct }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountingError {
    /// Indexed by class code.
    pub per_class: Vec<ClassCountingError>,
    pub pooled: ClassCountingError,
}

pub fn counting_error(true_counts: &PrimitiveCounts, predicted: &PrimitiveCounts) -> CountingError {
    CountingError {
        per_class: PrimitiveClass::ALL
            .iter()
            .map(|&c| ClassCountingError::new(true_counts.get(c), predicted.get(c)))
            .collect(),
        pooled: ClassCountingError::new(true_counts.total(), predicted.total()),
    }
}

/// One row per recording and class: `recording,activity,class,count`.
pub fn write_counts_csv<W: Write>(writer: W, rows: &[(String, PrimitiveCounts)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["recording", "activity", "class", "count"])?;
    for (recording, counts) in rows {
        let activity = counts.activity.as_deref().unwrap_or("");
        for c in PrimitiveClass::ALL {
            w.write_record([recording.as_str(), activity, c.name(), &counts.get(c).to_string()])?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
