//! Controlled experiment: policy conditions × simulated users × repetitions.

mod report;
mod users;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

pub use report::{build_report, Comparison, ConditionSummary, ExperimentReport, MeanSd, PhaseSummary, PHASES};
pub use users::{
    LlmUser, Profile, ResponseProgram, ScriptedUser, SimulatedUser, RICH_RESPONSE, TERSE_RESPONSE, USER_TEMPERATURE,
};

use crate::engine::{Engine, PolicyKind, SessionConfig, SessionStatus, SessionTranscript, DEFAULT_HORIZON};
use crate::error::{Error, Result};
use crate::policy::{EpsilonSchedule, DEFAULT_ALPHA};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    /// Short identifier, e.g. `config2`.
    pub name: String,
    /// Table heading, e.g. `Config 2 (ε=0.30)`.
    pub label: String,
    pub policy: PolicyKind,
    pub schedule: EpsilonSchedule,
}

impl Condition {
    pub fn baseline() -> Self {
        Condition {
            name: "baseline".into(),
            label: "Prior Baseline".into(),
            policy: PolicyKind::historical_baseline(),
            schedule: EpsilonSchedule::default(),
        }
    }

    pub fn adaptive(name: impl Into<String>, label: impl Into<String>, schedule: EpsilonSchedule) -> Self {
        Condition { name: name.into(), label: label.into(), policy: PolicyKind::Adaptive, schedule }
    }

    /// Baseline plus fixed ε 0.15, fixed ε 0.30 and ε decaying 0.40 → 0.05.
    pub fn standard_set() -> Vec<Condition> {
        vec![
            Condition::baseline(),
            Condition::adaptive("config1", "Config 1 (ε=0.15)", EpsilonSchedule::Fixed { epsilon: 0.15 }),
            Condition::adaptive("config2", "Config 2 (ε=0.30)", EpsilonSchedule::Fixed { epsilon: 0.30 }),
            Condition::adaptive("config3", "Config 3 (ε: 0.40→0.05)", EpsilonSchedule::reference_decay()),
        ]
    }

    pub fn is_baseline(&self) -> bool {
        matches!(self.policy, PolicyKind::Baseline { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentDesign {
    pub conditions: Vec<Condition>,
    pub profiles: Vec<Profile>,
    pub reps: u32,
    pub seed: u64,
    pub horizon: u32,
    pub alpha: f64,
    /// Worker threads; results do not depend on it.
    pub workers: usize,
}

impl Default for ExperimentDesign {
    /// 4 conditions × 4 profiles × 5 repetitions.
    fn default() -> Self {
        ExperimentDesign {
            conditions: Condition::standard_set(),
            profiles: Profile::STANDARD.to_vec(),
            reps: 5,
            seed: 0,
            horizon: DEFAULT_HORIZON,
            alpha: DEFAULT_ALPHA,
            workers: 1,
        }
    }
}

impl ExperimentDesign {
    pub fn n_conversations(&self) -> usize {
        self.conditions.len() * self.profiles.len() * self.reps as usize
    }
}

/// Builds a fresh respondent for one conversation.
pub trait UserFactory: Sync {
    fn make(&self, profile: &Profile, seed: u64) -> Box<dyn SimulatedUser>;
}

impl<F> UserFactory for F
where
    F: Fn(&Profile, u64) -> Box<dyn SimulatedUser> + Sync,
{
    fn make(&self, profile: &Profile, seed: u64) -> Box<dyn SimulatedUser> {
        self(profile, seed)
    }
}

/// Persona-driven scripted users for every profile.
#[derive(Debug, Clone, Copy, Default)]
pub struct PersonaUsers;

impl UserFactory for PersonaUsers {
    fn make(&self, profile: &Profile, seed: u64) -> Box<dyn SimulatedUser> {
        Box::new(ScriptedUser::new(ResponseProgram::persona(profile.clone()), seed))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversationResult {
    pub condition: String,
    pub profile: Profile,
    pub rep: u32,
    pub session_seed: u64,
    pub user_seed: u64,
    /// Possibly partial when `error` is set.
    pub transcript: SessionTranscript,
    pub error: Option<String>,
}

impl ConversationResult {
    pub fn is_complete(&self) -> bool {
        self.error.is_none() && self.transcript.status == SessionStatus::Completed
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub report: ExperimentReport,
    pub conversations: Vec<ConversationResult>,
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed for a respondent. It does not depend on the condition, so every
/// condition meets the same simulated students.
pub fn user_seed(seed: u64, profile_idx: usize, rep: u32) -> u64 {
    splitmix(splitmix(seed ^ 0x5553_4552) ^ ((profile_idx as u64) << 32 | u64::from(rep)))
}

pub fn session_seed(seed: u64, condition_idx: usize, profile_idx: usize, rep: u32) -> u64 {
    splitmix(user_seed(seed, profile_idx, rep) ^ splitmix(condition_idx as u64 + 1))
}

/// Runs one conversation to the horizon (or until an error).
pub fn run_conversation(
    engine: &Engine,
    id: &str,
    config: SessionConfig,
    user: &mut dyn SimulatedUser,
) -> (SessionTranscript, Option<String>) {
    let mut session = match engine.start_session(id, config.clone()) {
        Ok(s) => s,
        Err(e) => {
            let empty = SessionTranscript {
                session_id: id.to_string(),
                status: SessionStatus::Terminated,
                config,
                opening_question: String::new(),
                exchanges: Vec::new(),
            };
            return (empty, Some(e.to_string()));
        }
    };
    let mut error = None;
    while session.status() == SessionStatus::Active {
        let question = session.current_question().unwrap_or_default().to_string();
        let reply = user.respond(&question, session.current_action(), session.t() + 1);
        let outcome = reply.and_then(|text| engine.step(&mut session, &text));
        if let Err(e) = outcome {
            tracing::warn!(session = id, error = %e, "simulated conversation failed");
            error = Some(e.to_string());
            break;
        }
    }
    (engine.end_session(&mut session), error)
}

struct Job {
    index: usize,
    condition: usize,
    profile: usize,
    rep: u32,
}

/// Runs every (condition, profile, repetition) conversation. Failures are
/// recorded in the result rather than aborting the run.
pub fn run_experiment(engine: &Engine, design: &ExperimentDesign, users: &dyn UserFactory) -> Result<ExperimentResult> {
    if design.conditions.is_empty() || design.profiles.is_empty() || design.reps == 0 {
        return Err(Error::InvalidInput("experiment needs conditions, profiles and at least one repetition".into()));
    }
    let mut jobs = Vec::with_capacity(design.n_conversations());
    for condition in 0..design.conditions.len() {
        for profile in 0..design.profiles.len() {
            for rep in 0..design.reps {
                jobs.push(Job { index: jobs.len(), condition, profile, rep });
            }
        }
    }

    let run_job = |job: &Job| -> ConversationResult {
        let cond = &design.conditions[job.condition];
        let profile = &design.profiles[job.profile];
        let us = user_seed(design.seed, job.profile, job.rep);
        let ss = session_seed(design.seed, job.condition, job.profile, job.rep);
        let config = SessionConfig {
            horizon: design.horizon,
            schedule: cond.schedule,
            alpha: design.alpha,
            policy: cond.policy.clone(),
            seed: ss,
            role: Some(profile.to_string()),
            topic: None,
        };
        let id = format!("{}-{}-{:02}", cond.name, profile, job.rep + 1);
        let mut user = users.make(profile, us);
        let (transcript, error) = run_conversation(engine, &id, config, user.as_mut());
        ConversationResult {
            condition: cond.name.clone(),
            profile: profile.clone(),
            rep: job.rep,
            session_seed: ss,
            user_seed: us,
            transcript,
            error,
        }
    };

    let workers = design.workers.clamp(1, jobs.len());
    let mut results: Vec<Option<ConversationResult>> = vec![None; jobs.len()];
    if workers == 1 {
        for job in &jobs {
            results[job.index] = Some(run_job(job));
        }
    } else {
        let next = AtomicUsize::new(0);
        let slots = Mutex::new(&mut results);
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(job) = jobs.get(i) else { break };
                    let r = run_job(job);
                    slots.lock().unwrap_or_else(|p| p.into_inner())[job.index] = Some(r);
                });
            }
        });
    }
    let conversations: Vec<ConversationResult> =
        results.into_iter().map(|r| r.expect("every job produces a result")).collect();
    let report = build_report(design, &conversations, engine.prior())?;
    Ok(ExperimentResult { report, conversations })
}

impl ExperimentResult {
    /// Writes `report.json`, `report.txt` and `transcripts.jsonl` into `dir`.
    pub fn write_to(&self, dir: &std::path::Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let write = |name: &str, body: &[u8]| {
            let p = dir.join(name);
            std::fs::write(&p, body).map_err(|e| Error::io(&p, e))
        };
        let mut json = serde_json::to_vec_pretty(&self.report).expect("report serializes");
        json.push(b'\n');
        write("report.json", &json)?;
        write("report.txt", self.report.render_text().as_bytes())?;
        let mut lines = Vec::new();
        for c in &self.conversations {
            serde_json::to_writer(&mut lines, c).expect("conversation serializes");
            lines.push(b'\n');
        }
        write("transcripts.jsonl", &lines)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::EvTable;

    #[test]
    fn seeds_are_shared_across_conditions_for_users_only() {
        assert_eq!(user_seed(1, 2, 3), user_seed(1, 2, 3));
        assert_ne!(session_seed(1, 0, 2, 3), session_seed(1, 1, 2, 3));
        assert_ne!(user_seed(1, 0, 0), user_seed(1, 0, 1));
    }

    #[test]
    fn small_design_runs_and_parallelism_is_invisible() {
        let engine = Engine::with_prior(EvTable::reference_prior()).unwrap();
        let mut design = ExperimentDesign { reps: 2, horizon: 6, seed: 11, ..ExperimentDesign::default() };
        let a = run_experiment(&engine, &design, &PersonaUsers).unwrap();
        design.workers = 3;
        let b = run_experiment(&engine, &design, &PersonaUsers).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.conversations.len(), 32);
        assert!(a.conversations.iter().all(|c| c.is_complete()));
    }
}
