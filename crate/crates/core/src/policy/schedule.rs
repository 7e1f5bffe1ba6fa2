use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exploration rate as a function of the exchange index `t` (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EpsilonSchedule {
    Fixed { epsilon: f64 },
    /// `start − (start − end) · t / horizon`, clamped to `[end, start]`.
    LinearDecay { start: f64, end: f64, horizon: u32 },
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        EpsilonSchedule::Fixed { epsilon: super::DEFAULT_EPSILON }
    }
}

impl EpsilonSchedule {
    pub fn fixed(epsilon: f64) -> Result<Self> {
        let s = EpsilonSchedule::Fixed { epsilon };
        s.validate()?;
        Ok(s)
    }

    pub fn linear_decay(start: f64, end: f64, horizon: u32) -> Result<Self> {
        let s = EpsilonSchedule::LinearDecay { start, end, horizon };
        s.validate()?;
        Ok(s)
    }

    /// The decaying configuration of the reference experiment: 0.40 down to
    /// 0.05 over 15 exchanges.
    pub fn reference_decay() -> Self {
        EpsilonSchedule::LinearDecay { start: 0.40, end: 0.05, horizon: 15 }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::InvalidInput(format!("{name} {v} outside [0, 1]")))
            }
        };
        match *self {
            EpsilonSchedule::Fixed { epsilon } => unit("epsilon", epsilon),
            EpsilonSchedule::LinearDecay { start, end, horizon } => {
                unit("epsilon start", start)?;
                unit("epsilon end", end)?;
                if end > start {
                    return Err(Error::InvalidInput(format!("decay end {end} above start {start}")));
                }
                if horizon == 0 {
                    return Err(Error::InvalidInput("decay horizon must be positive".into()));
                }
                Ok(())
            }
        }
    }

    /// Effective ε at exchange `t`. A fixed schedule accepts any `t ≥ 1`;
    /// a decay schedule requires `1 ≤ t ≤ horizon`.
    pub fn epsilon_at(&self, t: u32) -> Result<f64> {
        self.validate()?;
        if t == 0 {
            return Err(Error::InvalidInput("exchange index starts at 1".into()));
        }
        match *self {
            EpsilonSchedule::Fixed { epsilon } => Ok(epsilon),
            EpsilonSchedule::LinearDecay { start, end, horizon } => {
                if t > horizon {
                    return Err(Error::InvalidInput(format!("exchange {t} beyond decay horizon {horizon}")));
                }
                let e = start - (start - end) * f64::from(t) / f64::from(horizon);
                Ok(e.clamp(end, start))
            }
        }
    }
}

impl fmt::Display for EpsilonSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EpsilonSchedule::Fixed { epsilon } => write!(f, "fixed:{epsilon}"),
            EpsilonSchedule::LinearDecay { start, end, horizon } => write!(f, "decay:{start}:{end}:{horizon}"),
        }
    }
}

/// Accepts `0.3`, `fixed:0.3` or `decay:START:END:HORIZON`.
impl FromStr for EpsilonSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("cannot parse epsilon schedule {s:?}"));
        let num = |x: &str| x.trim().parse::<f64>().map_err(|_| bad());
        let parts: Vec<&str> = s.trim().split(':').collect();
        match parts.as_slice() {
            [v] => EpsilonSchedule::fixed(num(v)?),
            ["fixed", v] => EpsilonSchedule::fixed(num(v)?),
            ["decay", a, b, h] => {
                let h = h.trim().parse::<u32>().map_err(|_| bad())?;
                EpsilonSchedule::linear_decay(num(a)?, num(b)?, h)
            }
            _ => Err(bad()),
        }
    }
}
