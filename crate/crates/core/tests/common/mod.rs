//! Fixtures shared by the integration tests. Everything here is built from
//! first principles and reference figures, never from library output.
#![allow(dead_code)]

use std::collections::BTreeMap;

use survey_core::actions::ActionType;
use survey_core::corpus::RawExchangeRecord;
use survey_core::policy::ExchangePair;
use survey_core::states::EngagementState;

/// Reference initial estimates: (state, action, ev, n) for every cell.
pub const REFERENCE_CELLS: [(&str, &str, f64, u32); 25] = [
    ("low_improving", "specification", 0.058, 15),
    ("low_improving", "elaboration", 0.047, 9),
    ("low_improving", "topic_probe", 0.032, 3),
    ("low_improving", "validation", 0.0, 0),
    ("low_improving", "continuation", 0.0, 0),
    ("low_stable", "specification", 0.288, 112),
    ("low_stable", "elaboration", 0.170, 27),
    ("low_stable", "topic_probe", 0.305, 20),
    ("low_stable", "validation", 0.348, 4),
    ("low_stable", "continuation", 0.476, 1),
    ("medium", "specification", 0.071, 66),
    ("medium", "elaboration", 0.073, 28),
    ("medium", "topic_probe", 0.039, 22),
    ("medium", "validation", 0.0, 0),
    ("medium", "continuation", 0.0, 0),
    ("high_improving", "specification", 0.004, 33),
    ("high_improving", "elaboration", 0.020, 14),
    ("high_improving", "topic_probe", 0.000, 4),
    ("high_improving", "validation", 0.0, 0),
    ("high_improving", "continuation", 0.0, 0),
    ("high_stable", "specification", 0.040, 9),
    ("high_stable", "elaboration", 0.083, 1),
    ("high_stable", "topic_probe", 0.028, 3),
    ("high_stable", "validation", 0.0, 0),
    ("high_stable", "continuation", 0.0, 0),
];

pub fn reference_cells() -> Vec<(EngagementState, ActionType, f64, u32)> {
    REFERENCE_CELLS.iter().map(|(s, a, ev, n)| (s.parse().unwrap(), a.parse().unwrap(), *ev, *n)).collect()
}

/// A q_before value inside the quality band of `state`.
fn q_in_state(state: EngagementState) -> f64 {
    match state {
        EngagementState::LowImproving | EngagementState::LowStable => 0.12,
        EngagementState::Medium => 0.42,
        EngagementState::HighImproving | EngagementState::HighStable => 0.66,
    }
}

/// Pair log matching every reference cell: for a cell with n pairs and value
/// EV, k = ceil(0.75 n) pairs improve with gains spread symmetrically around
/// EV·n/k and the rest lose quality. Cells with EV = 0 get only losses.
pub fn reconstruction_pairs() -> Vec<ExchangePair> {
    let mut out = Vec::new();
    for (state, action, ev, n) in reference_cells() {
        if n == 0 {
            continue;
        }
        let qb = q_in_state(state);
        let k = if ev > 0.0 { ((0.75 * n as f64).ceil() as u32).max(1) } else { 0 };
        let mean_gain = if k > 0 { ev * n as f64 / k as f64 } else { 0.0 };
        for i in 0..k {
            // symmetric offsets keep the mean exact; an odd leftover gets 0
            let spread = 0.2 * mean_gain;
            let offset = if k % 2 == 1 && i == k - 1 {
                0.0
            } else if i % 2 == 0 {
                spread
            } else {
                -spread
            };
            out.push(ExchangePair::new(state, action, qb, qb + mean_gain + offset).unwrap());
        }
        for i in 0..(n - k) {
            let loss = 0.02 + 0.01 * (i % 3) as f64;
            out.push(ExchangePair::new(state, action, qb, qb - loss).unwrap());
        }
    }
    out
}

/// Group-by oracle for EV = P(ΔQ > 0) · mean(ΔQ | ΔQ > 0).
pub fn brute_force_ev(pairs: &[ExchangePair]) -> BTreeMap<(usize, usize), (f64, u32)> {
    let mut groups: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    for p in pairs {
        groups.entry((p.state_before.index(), p.action.index())).or_default().push(p.q_after - p.q_before);
    }
    groups
        .into_iter()
        .map(|(k, deltas)| {
            let pos: Vec<f64> = deltas.iter().copied().filter(|d| *d > 0.0).collect();
            let ev = if pos.is_empty() {
                0.0
            } else {
                (pos.len() as f64 / deltas.len() as f64) * (pos.iter().sum::<f64>() / pos.len() as f64)
            };
            (k, (ev, deltas.len() as u32))
        })
        .collect()
}

/// `n` values with exactly the given mean and population (n-denominator)
/// standard deviation.
pub fn sample_with_population_stats(mean: f64, pop_sd: f64, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|i| i as f64 - (n - 1) as f64 / 2.0).collect();
    let m = raw.iter().sum::<f64>() / n as f64;
    let sd = (raw.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n as f64).sqrt();
    raw.iter().map(|x| mean + pop_sd * (x - m) / sd).collect()
}

/// Per-conversation exchange counts matching the reference corpus marginals:
/// 96 conversations, 467 responses, 28 single-exchange conversations,
/// median 2.5, range 1 to 18, sd about 5.5.
pub fn marginal_conversation_lengths() -> Vec<usize> {
    let mut lengths = vec![1usize; 28];
    lengths.extend(std::iter::repeat_n(2, 20));
    // 48 longer conversations summing to 399
    let long: [usize; 48] = [
        3, 3, 3, 3, 3, 3, 3, 3, 3, 3, 3, 3, 4, 4, 4, 4, 4, 4, 4, 4, 4, 4, 4, 5, 5, 5, 6, 6, 7, 7, 8, 8, 10, 12, 14,
        14, 16, 16, 18, 18, 18, 18, 18, 18, 18, 18, 18, 18,
    ];
    lengths.extend(long);
    lengths
}

/// Word counts for the 467 responses: mean 18.3 words, median 10.
pub fn marginal_response_words() -> Vec<usize> {
    let mut w = vec![4usize; 200];
    w.extend(std::iter::repeat_n(10, 40));
    // 227 longer answers carrying the rest of the 8546 words
    let remaining = 8546 - 200 * 4 - 40 * 10;
    let n = 227;
    let base = remaining / n;
    let extra = remaining % n;
    w.extend((0..n).map(|i| base + usize::from(i < extra)));
    w
}

/// A cleaned-format log with the marginals above, plus noise records that
/// cleaning must remove (placeholders and repeated answers).
pub fn marginal_log() -> Vec<RawExchangeRecord> {
    let lengths = marginal_conversation_lengths();
    let words = marginal_response_words();
    let mut next_word = 0;
    let mut out = Vec::new();
    for (c, len) in lengths.iter().enumerate() {
        let id = format!("c{c:03}");
        let mut turn = 0;
        for t in 0..*len {
            let n = words[next_word];
            next_word += 1;
            let mut text = format!("reply{t}");
            for _ in 1..n {
                text.push_str(" campus");
            }
            turn += 1;
            out.push(RawExchangeRecord::new(&id, turn, "How is campus life going?", text.clone()));
            if c % 7 == 0 && t == 0 {
                turn += 1;
                out.push(RawExchangeRecord::new(&id, turn, "Anything else?", text));
                turn += 1;
                out.push(RawExchangeRecord::new(&id, turn, "Tell me more.", "N/A"));
            }
        }
        if c % 11 == 0 {
            turn += 1;
            out.push(RawExchangeRecord::new(&id, turn, "nan", "something"));
        }
    }
    assert_eq!(next_word, words.len());
    out
}
