//! Expected-value policy over (engagement state, follow-up action).
//!
//! Offline, `EV(s, a) = P(ΔQ > 0 | s, a) · E[ΔQ | ΔQ > 0, s, a]` is estimated
//! from historical exchange pairs. Online, each session works on its own copy
//! of that table: actions are chosen ε-greedily and, once the next response
//! has been scored, the value of the previous (state, action) cell moves
//! toward the observed quality change with step size α.

mod schedule;
mod table;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use schedule::EpsilonSchedule;
pub use table::{read_ev_table, write_ev_table, ConfidenceBand, EvTable, Provenance};

use crate::actions::ActionType;
use crate::error::{Error, Result};
use crate::states::EngagementState;

/// Learning rate used by every configuration in the reference experiment.
pub const DEFAULT_ALPHA: f64 = 0.3;
pub const DEFAULT_EPSILON: f64 = 0.3;

/// Two consecutive responses linked by the intervening question.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExchangePair {
    pub state_before: EngagementState,
    pub action: ActionType,
    pub q_before: f64,
    pub q_after: f64,
}

impl ExchangePair {
    pub fn new(state_before: EngagementState, action: ActionType, q_before: f64, q_after: f64) -> Result<Self> {
        for q in [q_before, q_after] {
            if !(0.0..=1.0).contains(&q) {
                return Err(Error::InvalidInput(format!("quality {q} outside [0, 1]")));
            }
        }
        Ok(ExchangePair { state_before, action, q_before, q_after })
    }

    pub fn delta(&self) -> f64 {
        self.q_after - self.q_before
    }
}

/// Builds the prior table. Cells without observations stay at 0.0;
/// a change of exactly zero is not an improvement.
pub fn compute_priors<'a>(pairs: impl IntoIterator<Item = &'a ExchangePair>) -> EvTable {
    let mut n = [[0u32; 5]; 5];
    let mut improved = [[0u32; 5]; 5];
    let mut gain = [[0.0f64; 5]; 5];
    for p in pairs {
        let (s, a) = (p.state_before.index(), p.action.index());
        n[s][a] += 1;
        let d = p.delta();
        if d > 0.0 {
            improved[s][a] += 1;
            gain[s][a] += d;
        }
    }
    let mut values = [[0.0f64; 5]; 5];
    for s in 0..5 {
        for a in 0..5 {
            if improved[s][a] > 0 {
                let p = f64::from(improved[s][a]) / f64::from(n[s][a]);
                let mean_gain = gain[s][a] / f64::from(improved[s][a]);
                values[s][a] = p * mean_gain;
            }
        }
    }
    EvTable::from_parts(values, n, Provenance::Prior)
}

/// Outcome of one ε-greedy draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub action: ActionType,
    pub explored: bool,
    pub epsilon: f64,
}

/// With probability ε a uniformly random action, otherwise the greedy one.
pub fn select_action<R: Rng + ?Sized>(
    table: &EvTable,
    state: EngagementState,
    epsilon: f64,
    rng: &mut R,
) -> Result<Selection> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::InvalidInput(format!("epsilon {epsilon} outside [0, 1]")));
    }
    let explore = rng.random::<f64>() < epsilon;
    let action = if explore {
        ActionType::ALL[rng.random_range(0..ActionType::ALL.len())]
    } else {
        table.greedy(state)
    };
    tracing::trace!(%state, epsilon, explore, %action, "action selected");
    Ok(Selection { action, explored: explore, epsilon })
}

/// `EV ← EV + α (r − EV)` on a session table; returns the new value.
pub fn update_ev(
    table: &mut EvTable,
    state: EngagementState,
    action: ActionType,
    reward: f64,
    alpha: f64,
) -> Result<f64> {
    table.update(state, action, reward, alpha)
}

/// Non-adaptive sampler reproducing a fixed action mix regardless of state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselinePolicy {
    weights: [f64; 5],
}

/// Historical action mix: 291/110/60/4/2 of 467 questions.
pub const HISTORICAL_ACTION_WEIGHTS: [f64; 5] = [0.623, 0.236, 0.128, 0.009, 0.004];

impl Default for BaselinePolicy {
    fn default() -> Self {
        BaselinePolicy::new(HISTORICAL_ACTION_WEIGHTS).expect("historical weights are valid")
    }
}

impl BaselinePolicy {
    /// Weights are normalized to sum to one.
    pub fn new(weights: [f64; 5]) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidInput(format!("baseline weights must be non-negative: {weights:?}")));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidInput("baseline weights sum to zero".into()));
        }
        Ok(BaselinePolicy { weights: weights.map(|w| w / total) })
    }

    pub fn weights(&self) -> [f64; 5] {
        self.weights
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ActionType {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return ActionType::ALL[i];
            }
        }
        // u landed in the rounding gap above the cumulative sum
        *ActionType::ALL
            .iter()
            .rev()
            .find(|a| self.weights[a.index()] > 0.0)
            .expect("at least one positive weight")
    }
}
