use std::fmt;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::actions::ActionType;
use crate::error::{Error, Result};
use crate::states::EngagementState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Estimated offline; read-only.
    Prior,
    /// A per-session working copy.
    Session,
}

/// Reliability of a prior cell by observation count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConfidenceBand {
    /// n ≥ 20
    R,
    /// 5 ≤ n < 20
    M,
    /// 1 ≤ n < 5
    L,
    /// n = 0
    N,
}

impl ConfidenceBand {
    pub fn of(n: u32) -> ConfidenceBand {
        match n {
            0 => ConfidenceBand::N,
            1..=4 => ConfidenceBand::L,
            5..=19 => ConfidenceBand::M,
            _ => ConfidenceBand::R,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ConfidenceBand::R => "R",
            ConfidenceBand::M => "M",
            ConfidenceBand::L => "L",
            ConfidenceBand::N => "N",
        }
    }
}

impl fmt::Display for ConfidenceBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// 5 × 5 table of expected values and prior observation counts, indexed by
/// [`EngagementState`] then [`ActionType`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvTable {
    values: [[f64; 5]; 5],
    counts: [[u32; 5]; 5],
    provenance: Provenance,
}

// Reference initial estimates (value, n) from 371 historical pairs; rows in
// state order, columns in action order.
const REFERENCE_PRIOR: [[(f64, u32); 5]; 5] = [
    [(0.058, 15), (0.047, 9), (0.032, 3), (0.0, 0), (0.0, 0)],
    [(0.288, 112), (0.170, 27), (0.305, 20), (0.348, 4), (0.476, 1)],
    [(0.071, 66), (0.073, 28), (0.039, 22), (0.0, 0), (0.0, 0)],
    [(0.004, 33), (0.020, 14), (0.000, 4), (0.0, 0), (0.0, 0)],
    [(0.040, 9), (0.083, 1), (0.028, 3), (0.0, 0), (0.0, 0)],
];

impl EvTable {
    pub fn zeros(provenance: Provenance) -> Self {
        EvTable { values: [[0.0; 5]; 5], counts: [[0; 5]; 5], provenance }
    }

    pub(crate) fn from_parts(values: [[f64; 5]; 5], counts: [[u32; 5]; 5], provenance: Provenance) -> Self {
        EvTable { values, counts, provenance }
    }

    /// The initial estimates reported for the historical campus-climate
    /// corpus, rounded to three decimals.
    pub fn reference_prior() -> Self {
        let mut t = EvTable::zeros(Provenance::Prior);
        for (s, row) in REFERENCE_PRIOR.iter().enumerate() {
            for (a, &(v, n)) in row.iter().enumerate() {
                t.values[s][a] = v;
                t.counts[s][a] = n;
            }
        }
        t
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn value(&self, state: EngagementState, action: ActionType) -> f64 {
        self.values[state.index()][action.index()]
    }

    pub fn count(&self, state: EngagementState, action: ActionType) -> u32 {
        self.counts[state.index()][action.index()]
    }

    pub fn band(&self, state: EngagementState, action: ActionType) -> ConfidenceBand {
        ConfidenceBand::of(self.count(state, action))
    }

    pub fn row(&self, state: EngagementState) -> [f64; 5] {
        self.values[state.index()]
    }

    pub fn total_count(&self) -> u32 {
        self.counts.iter().flatten().sum()
    }

    /// Highest-value action; ties go to the earliest action in
    /// [`ActionType::ALL`].
    pub fn greedy(&self, state: EngagementState) -> ActionType {
        let row = &self.values[state.index()];
        let mut best = 0;
        for a in 1..5 {
            if row[a] > row[best] {
                best = a;
            }
        }
        ActionType::ALL[best]
    }

    /// Independent working copy for one session. Counts are carried over
    /// unchanged and never modified by updates.
    pub fn fork_session(&self) -> EvTable {
        EvTable { values: self.values, counts: self.counts, provenance: Provenance::Session }
    }

    pub(crate) fn update(&mut self, state: EngagementState, action: ActionType, reward: f64, alpha: f64) -> Result<f64> {
        if self.provenance != Provenance::Session {
            return Err(Error::Contract("prior tables are read-only; fork a session copy first".into()));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidInput(format!("learning rate {alpha} outside (0, 1]")));
        }
        if !reward.is_finite() {
            return Err(Error::InvalidInput(format!("reward {reward} is not finite")));
        }
        let cell = &mut self.values[state.index()][action.index()];
        *cell += alpha * (reward - *cell);
        Ok(*cell)
    }

    /// Overwrites one cell of a session table (tests and operator tooling).
    pub fn set_value(&mut self, state: EngagementState, action: ActionType, value: f64) {
        assert_eq!(self.provenance, Provenance::Session, "prior tables are read-only");
        self.values[state.index()][action.index()] = value;
    }

    /// Records in state-major, action-minor order.
    pub fn records(&self) -> Vec<EvRecord> {
        let mut out = Vec::with_capacity(25);
        for s in EngagementState::ALL {
            for a in ActionType::ALL {
                out.push(EvRecord {
                    state: s,
                    action: a,
                    ev: self.value(s, a),
                    n: self.count(s, a),
                    band: self.band(s, a),
                });
            }
        }
        out
    }

    /// Fixed-width rendering with one row per state.
    pub fn render(&self) -> String {
        let mut out = format!("{:<16}", "State");
        for a in ActionType::ALL {
            out.push_str(&format!("{:>18}", a.title()));
        }
        out.push('\n');
        for s in EngagementState::ALL {
            out.push_str(&format!("{:<16}", s.as_str()));
            for a in ActionType::ALL {
                let cell = format!("{:.3} (n={}, {})", self.value(s, a), self.count(s, a), self.band(s, a));
                out.push_str(&format!("{cell:>18}"));
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvRecord {
    pub state: EngagementState,
    pub action: ActionType,
    pub ev: f64,
    pub n: u32,
    pub band: ConfidenceBand,
}

const HEADER: &str = "state\taction\tev\tn\tconfidence_band";

/// Tab-separated, one header line then 25 records.
pub fn write_ev_table(path: &Path, table: &EvTable) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
    let mut body = String::from(HEADER);
    body.push('\n');
    for r in table.records() {
        body.push_str(&format!("{}\t{}\t{}\t{}\t{}\n", r.state, r.action, r.ev, r.n, r.band));
    }
    f.write_all(body.as_bytes()).map_err(|e| Error::io(path, e))?;
    f.flush().map_err(|e| Error::io(path, e))
}

/// Reads a table written by [`write_ev_table`]; all 25 cells must be present
/// exactly once. The result has prior provenance.
pub fn read_ev_table(path: &Path) -> Result<EvTable> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_ev_table(&text, path)
}

pub(crate) fn parse_ev_table(text: &str, path: &Path) -> Result<EvTable> {
    let mut table = EvTable::zeros(Provenance::Prior);
    let mut seen = [[false; 5]; 5];
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || (idx == 0 && line.starts_with("state")) {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 4 {
            return Err(Error::parse(path, lineno, "expected state, action, ev, n[, band]"));
        }
        let s: EngagementState = fields[0].parse().map_err(|e: Error| Error::parse(path, lineno, e.to_string()))?;
        let a: ActionType = fields[1].parse().map_err(|e: Error| Error::parse(path, lineno, e.to_string()))?;
        let ev: f64 = fields[2].parse().map_err(|_| Error::parse(path, lineno, format!("bad ev {:?}", fields[2])))?;
        let n: u32 = fields[3].parse().map_err(|_| Error::parse(path, lineno, format!("bad n {:?}", fields[3])))?;
        if !ev.is_finite() {
            return Err(Error::parse(path, lineno, "ev must be finite"));
        }
        if let Some(band) = fields.get(4) {
            if *band != ConfidenceBand::of(n).as_str() {
                return Err(Error::parse(path, lineno, format!("band {band} inconsistent with n={n}")));
            }
        }
        if std::mem::replace(&mut seen[s.index()][a.index()], true) {
            return Err(Error::parse(path, lineno, format!("duplicate cell ({s}, {a})")));
        }
        table.values[s.index()][a.index()] = ev;
        table.counts[s.index()][a.index()] = n;
    }
    let missing = seen.iter().flatten().filter(|x| !**x).count();
    if missing > 0 {
        return Err(Error::parse(path, text.lines().count(), format!("{missing} of 25 cells missing")));
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_prior_shape() {
        let t = EvTable::reference_prior();
        assert_eq!(t.total_count(), 371);
        let populated = t.records().iter().filter(|r| r.n > 0).count();
        assert_eq!(populated, 17);
        let bands: Vec<ConfidenceBand> = t.records().iter().filter(|r| r.n > 0).map(|r| r.band).collect();
        assert_eq!(bands.iter().filter(|b| **b == ConfidenceBand::R).count(), 7);
        assert_eq!(bands.iter().filter(|b| **b == ConfidenceBand::M).count(), 4);
        assert_eq!(bands.iter().filter(|b| **b == ConfidenceBand::L).count(), 6);
    }

    #[test]
    fn bands() {
        assert_eq!(ConfidenceBand::of(0), ConfidenceBand::N);
        assert_eq!(ConfidenceBand::of(1), ConfidenceBand::L);
        assert_eq!(ConfidenceBand::of(4), ConfidenceBand::L);
        assert_eq!(ConfidenceBand::of(5), ConfidenceBand::M);
        assert_eq!(ConfidenceBand::of(19), ConfidenceBand::M);
        assert_eq!(ConfidenceBand::of(20), ConfidenceBand::R);
    }

    #[test]
    fn fork_isolation() {
        let prior = EvTable::reference_prior();
        let snapshot = prior.clone();
        let mut a = prior.fork_session();
        let mut b = prior.fork_session();
        a.update(EngagementState::Medium, ActionType::Validation, 1.0, 0.3).unwrap();
        b.update(EngagementState::Medium, ActionType::Validation, -1.0, 0.3).unwrap();
        assert_ne!(a, b);
        assert_eq!(prior, snapshot);
        let mut c = a.fork_session();
        c.update(EngagementState::Medium, ActionType::Validation, 1.0, 0.3).unwrap();
        assert_ne!(a, c);
        assert_eq!(c.provenance(), Provenance::Session);
        assert_eq!(c.count(EngagementState::LowStable, ActionType::Specification), 112);
    }

    #[test]
    fn file_round_trip_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ev.tsv");
        let t = EvTable::reference_prior();
        write_ev_table(&p, &t).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 26);
        assert!(text.contains("low_stable\ttopic_probe\t0.305\t20\tR"));
        assert_eq!(read_ev_table(&p).unwrap(), t);

        let truncated: String = text.lines().take(20).map(|l| format!("{l}\n")).collect();
        assert!(parse_ev_table(&truncated, &p).is_err());
        let dup = format!("{text}low_stable\ttopic_probe\t0.1\t20\tR\n");
        assert!(parse_ev_table(&dup, &p).is_err());
        let bad_band = text.replace("0.305\t20\tR", "0.305\t20\tM");
        assert!(parse_ev_table(&bad_band, &p).is_err());
    }
}
