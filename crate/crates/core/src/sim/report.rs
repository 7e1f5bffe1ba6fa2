use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{ConversationResult, ExperimentDesign};
use crate::actions::ActionType;
use crate::error::Result;
use crate::policy::EvTable;
use crate::stats::{cohens_d, mean, sample_sd, student_t_test};

/// (name, first exchange, last exchange), inclusive and 1-based.
pub const PHASES: [(&str, u32, u32); 3] = [("early", 1, 5), ("mid", 6, 10), ("late", 11, 15)];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    /// Sample standard deviation.
    pub sd: f64,
    pub n: usize,
}

impl MeanSd {
    pub fn of(xs: &[f64]) -> Self {
        MeanSd { mean: mean(xs), sd: sample_sd(xs), n: xs.len() }
    }
}

/// A condition's metric against the baseline's.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub diff: f64,
    pub t: f64,
    pub df: f64,
    pub p: f64,
    pub d: f64,
}

impl Comparison {
    /// `None` when either sample is too small or has no spread.
    pub fn between(a: &[f64], baseline: &[f64]) -> Option<Comparison> {
        let tt = student_t_test(a, baseline).ok()?;
        let d = cohens_d(a, baseline).ok()?;
        Some(Comparison { diff: mean(a) - mean(baseline), t: tt.t, df: tt.df, p: tt.p, d })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSummary {
    pub name: String,
    pub first: u32,
    pub last: u32,
    /// Q at the phase's last exchange minus Q at its first.
    pub delta: MeanSd,
    /// Mean quality over the phase's exchanges.
    pub quality: MeanSd,
    pub vs_baseline: Option<Comparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub name: String,
    pub label: String,
    pub n_conversations: usize,
    pub n_complete: usize,
    /// Session ids of conversations excluded from the metrics.
    pub incomplete: Vec<String>,
    /// Q at the final exchange minus Q at the first.
    pub delta_q: MeanSd,
    pub mean_quality: MeanSd,
    pub initial_quality: MeanSd,
    pub final_quality: MeanSd,
    /// Share of exchanges (t ≥ 2) whose quality rose.
    pub success_rate: f64,
    pub phases: Vec<PhaseSummary>,
    /// Follow-up actions chosen, in action order.
    pub action_counts: [usize; 5],
    pub action_fractions: [f64; 5],
    /// Share of chosen actions with positive prior EV in their state.
    pub appropriateness: f64,
    pub vs_baseline: Option<Comparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub seed: u64,
    pub reps: u32,
    pub horizon: u32,
    pub profiles: Vec<String>,
    pub baseline: Option<String>,
    pub conditions: Vec<ConditionSummary>,
}

struct Series {
    delta: Vec<f64>,
    mean_q: Vec<f64>,
    initial: Vec<f64>,
    finals: Vec<f64>,
    phase_delta: Vec<Vec<f64>>,
    phase_quality: Vec<Vec<f64>>,
}

fn series(convs: &[&ConversationResult]) -> Series {
    let mut s = Series {
        delta: Vec::new(),
        mean_q: Vec::new(),
        initial: Vec::new(),
        finals: Vec::new(),
        phase_delta: vec![Vec::new(); PHASES.len()],
        phase_quality: vec![Vec::new(); PHASES.len()],
    };
    for c in convs {
        let q = c.transcript.qualities();
        let (Some(first), Some(last)) = (q.first(), q.last()) else { continue };
        s.delta.push(last - first);
        s.mean_q.push(mean(&q));
        s.initial.push(*first);
        s.finals.push(*last);
        for (i, (_, a, b)) in PHASES.iter().enumerate() {
            if q.len() >= *b as usize {
                let slice = &q[*a as usize - 1..*b as usize];
                s.phase_delta[i].push(slice[slice.len() - 1] - slice[0]);
                s.phase_quality[i].push(mean(slice));
            }
        }
    }
    s
}

/// Aggregates raw conversations into per-condition summaries. Only complete
/// conversations enter the metrics.
pub fn build_report(
    design: &ExperimentDesign,
    conversations: &[ConversationResult],
    prior: &EvTable,
) -> Result<ExperimentReport> {
    let baseline = design.conditions.iter().find(|c| c.is_baseline()).map(|c| c.name.clone());
    let complete_of = |name: &str| -> Vec<&ConversationResult> {
        conversations.iter().filter(|c| c.condition == name && c.is_complete()).collect()
    };
    let base_series = baseline.as_deref().map(|b| series(&complete_of(b)));

    let mut summaries = Vec::new();
    for cond in &design.conditions {
        let all: Vec<&ConversationResult> = conversations.iter().filter(|c| c.condition == cond.name).collect();
        let done = complete_of(&cond.name);
        let s = series(&done);

        let mut improved = 0usize;
        let mut transitions = 0usize;
        let mut counts = [0usize; 5];
        let mut appropriate = 0usize;
        for c in &done {
            for e in &c.transcript.exchanges {
                if let Some(r) = e.reward {
                    transitions += 1;
                    if r > 0.0 {
                        improved += 1;
                    }
                }
                if let Some(a) = e.next_action {
                    counts[a.index()] += 1;
                    if prior.value(e.state, a) > 0.0 {
                        appropriate += 1;
                    }
                }
            }
        }
        let total_actions: usize = counts.iter().sum();
        let frac = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };

        let compare = |mine: &[f64], pick: fn(&Series) -> &Vec<f64>| -> Option<Comparison> {
            if cond.is_baseline() {
                return None;
            }
            base_series.as_ref().and_then(|b| Comparison::between(mine, pick(b)))
        };
        let phases = PHASES
            .iter()
            .enumerate()
            .map(|(i, (name, a, b))| PhaseSummary {
                name: name.to_string(),
                first: *a,
                last: *b,
                delta: MeanSd::of(&s.phase_delta[i]),
                quality: MeanSd::of(&s.phase_quality[i]),
                vs_baseline: if cond.is_baseline() {
                    None
                } else {
                    base_series.as_ref().and_then(|bs| Comparison::between(&s.phase_delta[i], &bs.phase_delta[i]))
                },
            })
            .collect();

        summaries.push(ConditionSummary {
            name: cond.name.clone(),
            label: cond.label.clone(),
            n_conversations: all.len(),
            n_complete: done.len(),
            incomplete: all.iter().filter(|c| !c.is_complete()).map(|c| c.transcript.session_id.clone()).collect(),
            delta_q: MeanSd::of(&s.delta),
            mean_quality: MeanSd::of(&s.mean_q),
            initial_quality: MeanSd::of(&s.initial),
            final_quality: MeanSd::of(&s.finals),
            success_rate: frac(improved, transitions),
            phases,
            action_counts: counts,
            action_fractions: counts.map(|n| frac(n, total_actions)),
            appropriateness: frac(appropriate, total_actions),
            vs_baseline: compare(&s.delta, |b| &b.delta),
        });
    }
    Ok(ExperimentReport {
        seed: design.seed,
        reps: design.reps,
        horizon: design.horizon,
        profiles: design.profiles.iter().map(|p| p.to_string()).collect(),
        baseline,
        conditions: summaries,
    })
}

fn pm(m: &MeanSd) -> String {
    format!("{:+.3} ± {:.3}", m.mean, m.sd)
}

impl ExperimentReport {
    /// Condition | ΔQ | vs. baseline | p | d | Q̄ | Q_final
    pub fn render_overall(&self) -> String {
        let mut out = String::from("Overall performance\n");
        let _ = writeln!(
            out,
            "{:<26}{:>18}{:>14}{:>9}{:>9}{:>18}{:>18}",
            "Condition", "ΔQ", "vs. Baseline", "p", "d", "Q̄", "Q_final"
        );
        for c in &self.conditions {
            let (diff, p, d) = match &c.vs_baseline {
                Some(cmp) => (format!("{:+.3}", cmp.diff), format!("{:.3}", cmp.p), format!("{:+.3}", cmp.d)),
                None => ("---".into(), "---".into(), "---".into()),
            };
            let _ = writeln!(
                out,
                "{:<26}{:>18}{:>14}{:>9}{:>9}{:>18}{:>18}",
                c.label,
                pm(&c.delta_q),
                diff,
                p,
                d,
                format!("{:.3} ± {:.3}", c.mean_quality.mean, c.mean_quality.sd),
                format!("{:.3} ± {:.3}", c.final_quality.mean, c.final_quality.sd)
            );
        }
        let n: Vec<String> = self.conditions.iter().map(|c| format!("{}={}/{}", c.name, c.n_complete, c.n_conversations)).collect();
        let _ = writeln!(out, "complete conversations: {}", n.join(", "));
        out
    }

    /// Phase | one column per condition
    pub fn render_phases(&self) -> String {
        let mut out = String::from("Phase-specific quality change\n");
        let _ = write!(out, "{:<16}", "Phase");
        for c in &self.conditions {
            let _ = write!(out, "{:>26}", c.label);
        }
        out.push('\n');
        for (i, (name, a, b)) in PHASES.iter().enumerate() {
            let _ = write!(out, "{:<16}", format!("{} ({a}-{b})", capitalize(name)));
            for c in &self.conditions {
                let cell = match c.phases.get(i) {
                    Some(p) if p.delta.n > 0 => {
                        let star = match &p.vs_baseline {
                            Some(cmp) if cmp.p < 0.05 => "*",
                            _ => "",
                        };
                        format!("{}{star}", pm(&p.delta))
                    }
                    _ => "n/a".to_string(),
                };
                let _ = write!(out, "{cell:>26}");
            }
            out.push('\n');
        }
        out
    }

    /// Action | share per condition
    pub fn render_actions(&self) -> String {
        let mut out = String::from("Action type distribution\n");
        let _ = write!(out, "{:<16}", "Action Type");
        for c in &self.conditions {
            let _ = write!(out, "{:>26}", c.label);
        }
        out.push('\n');
        for a in ActionType::ALL {
            let _ = write!(out, "{:<16}", a.title());
            for c in &self.conditions {
                let _ = write!(out, "{:>26}", format!("{:.1}%", 100.0 * c.action_fractions[a.index()]));
            }
            out.push('\n');
        }
        let _ = write!(out, "{:<16}", "Appropriate");
        for c in &self.conditions {
            let _ = write!(out, "{:>26}", format!("{:.1}%", 100.0 * c.appropriateness));
        }
        out.push('\n');
        out
    }

    pub fn render_text(&self) -> String {
        format!("{}\n{}\n{}", self.render_overall(), self.render_phases(), self.render_actions())
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().collect::<String>() + c.as_str(),
        None => String::new(),
    }
}
