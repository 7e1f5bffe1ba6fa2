//! Engagement states from (composite quality, quality change).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const LOW_THRESHOLD: f64 = 0.3;
pub const HIGH_THRESHOLD: f64 = 0.6;
/// A change strictly above this counts as improving.
pub const IMPROVING_DELTA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngagementState {
    LowImproving,
    LowStable,
    Medium,
    HighImproving,
    HighStable,
}

impl EngagementState {
    pub const ALL: [EngagementState; 5] = [
        EngagementState::LowImproving,
        EngagementState::LowStable,
        EngagementState::Medium,
        EngagementState::HighImproving,
        EngagementState::HighStable,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EngagementState::LowImproving => "low_improving",
            EngagementState::LowStable => "low_stable",
            EngagementState::Medium => "medium",
            EngagementState::HighImproving => "high_improving",
            EngagementState::HighStable => "high_stable",
        }
    }
}

impl fmt::Display for EngagementState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EngagementState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EngagementState::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown engagement state {s:?}")))
    }
}

/// `current - previous`, or 0.0 on the first exchange of a session.
pub fn delta_q(current: f64, previous: Option<f64>) -> f64 {
    previous.map_or(0.0, |p| current - p)
}

pub fn assign_state(q: f64, dq: f64) -> Result<EngagementState> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidInput(format!("quality {q} outside [0, 1]")));
    }
    if dq.is_nan() {
        return Err(Error::InvalidInput("quality change is NaN".into()));
    }
    let improving = dq > IMPROVING_DELTA;
    Ok(if q < LOW_THRESHOLD {
        if improving {
            EngagementState::LowImproving
        } else {
            EngagementState::LowStable
        }
    } else if q < HIGH_THRESHOLD {
        EngagementState::Medium
    } else if improving {
        EngagementState::HighImproving
    } else {
        EngagementState::HighStable
    })
}
