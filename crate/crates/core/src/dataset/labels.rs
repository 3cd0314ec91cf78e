use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::ResponseRecord;

/// Drift-ratio damage state. Bins are half-open: `[0, 1%)`, `[1%, 2%)`,
/// `[2%, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum DamageClass {
    Slight = 1,
    Moderate = 2,
    Severe = 3,
}

impl DamageClass {
    pub const ALL: [DamageClass; 3] = [Self::Slight, Self::Moderate, Self::Severe];

    /// Zero-based index, used for one-hot targets and confusion matrices.
    pub fn index(self) -> usize {
        self as usize - 1
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(Self::Slight),
            2 => Some(Self::Moderate),
            3 => Some(Self::Severe),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoryDriftSummary {
    pub delta_max: f64,
    pub story_height: f64,
    pub drift_ratio: f64,
}

/// Peak absolute story drift over time and both axes, normalized by the
/// story height.
pub fn peak_drift_ratio(record: &ResponseRecord, story: usize, story_height: f64) -> Result<StoryDriftSummary> {
    let n = record.n_stories();
    if story == 0 || story > n {
        return Err(Error::invalid(format!("story {story} outside 1..={n}")));
    }
    if !(story_height > 0.0) {
        return Err(Error::invalid("story height must be positive"));
    }
    let drift = &record.drift[story - 1];
    let delta_max = drift.x.iter().chain(&drift.y).fold(0.0_f64, |m, d| m.max(d.abs()));
    Ok(StoryDriftSummary {
        delta_max,
        story_height,
        drift_ratio: delta_max / story_height,
    })
}

pub fn classify_drift(ratio: f64) -> Result<DamageClass> {
    if !(ratio >= 0.0) {
        return Err(Error::invalid(format!("drift ratio {ratio} must be non-negative")));
    }
    Ok(if ratio < 0.01 {
        DamageClass::Slight
    } else if ratio < 0.02 {
        DamageClass::Moderate
    } else {
        DamageClass::Severe
    })
}
