//! Live survey sessions.
//!
//! Each call to [`Engine::step`] handles one user response in a fixed order:
//! score it, reward the previous decision, assign the new state, choose the
//! next action and phrase the next question.

mod generator;

use std::fmt;
use std::io::Write as _;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use generator::{
    detect_topic, generate_question, opening_question, ContextExchange, GeneratedQuestion, LlmQuestionGenerator,
    QuestionDirective, QuestionGenerator, TemplateGenerator, GENERATION_TEMPERATURE, MAX_CONTEXT,
};

use crate::actions::ActionType;
use crate::error::{Error, Result};
use crate::lsde::{LsdeScore, LsdeScorer, SpecificityFlags};
use crate::policy::{
    select_action, BaselinePolicy, EpsilonSchedule, EvTable, Provenance, DEFAULT_ALPHA, HISTORICAL_ACTION_WEIGHTS,
};
use crate::states::{assign_state, delta_q, EngagementState};

pub const DEFAULT_HORIZON: u32 = 15;
/// Typed by a respondent in the terminal chat to end the session.
pub const QUIT_COMMAND: &str = "/quit";

/// How the next action is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicyKind {
    /// ε-greedy over the session's EV table, with online updates.
    Adaptive,
    /// Fixed weighted sampling that ignores state and never learns.
    Baseline { weights: [f64; 5] },
}

impl PolicyKind {
    pub fn historical_baseline() -> Self {
        PolicyKind::Baseline { weights: HISTORICAL_ACTION_WEIGHTS }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub horizon: u32,
    pub schedule: EpsilonSchedule,
    pub alpha: f64,
    pub policy: PolicyKind,
    /// Seeds every random decision in the session.
    pub seed: u64,
    pub role: Option<String>,
    pub topic: Option<String>,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            horizon: DEFAULT_HORIZON,
            schedule: EpsilonSchedule::default(),
            alpha: DEFAULT_ALPHA,
            policy: PolicyKind::Adaptive,
            seed: 0,
            role: None,
            topic: None,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidInput("horizon must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidInput(format!("alpha {} outside (0, 1]", self.alpha)));
        }
        self.schedule.validate()?;
        if let EpsilonSchedule::LinearDecay { horizon, .. } = self.schedule {
            // the last selection happens at exchange horizon − 1
            if horizon + 1 < self.horizon {
                return Err(Error::InvalidInput(format!(
                    "epsilon decay horizon {horizon} is shorter than the session horizon {}",
                    self.horizon
                )));
            }
        }
        if let PolicyKind::Baseline { weights } = self.policy {
            BaselinePolicy::new(weights)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Active,
    Completed,
    Terminated,
}

impl fmt::Display for SessionStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SessionStatus::Active => "active",
            SessionStatus::Completed => "completed",
            SessionStatus::Terminated => "terminated",
        })
    }
}

/// One change to the session EV table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvUpdate {
    pub state: EngagementState,
    pub action: ActionType,
    pub before: f64,
    pub after: f64,
}

/// Everything that happened in one exchange.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExchangeRecord {
    pub t: u32,
    pub question: String,
    /// Action behind `question`; `None` for the opening question.
    pub question_action: Option<ActionType>,
    pub response: String,
    pub score: LsdeScore,
    pub flags: SpecificityFlags,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub degraded: Vec<String>,
    pub delta_q: f64,
    pub state: EngagementState,
    /// `Q_t − Q_{t−1}`; absent at t = 1.
    pub reward: Option<f64>,
    pub ev_update: Option<EvUpdate>,
    /// Decision taken after this response; absent on the last exchange.
    pub next_action: Option<ActionType>,
    pub epsilon: Option<f64>,
    pub explored: Option<bool>,
    /// Sampling weights when the baseline policy chose the action.
    pub baseline_weights: Option<[f64; 5]>,
    /// Session EV row for `state` at decision time.
    pub ev_row: Option<[f64; 5]>,
    pub next_question: Option<String>,
    #[serde(default)]
    pub generator_fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionTranscript {
    pub session_id: String,
    pub status: SessionStatus,
    pub config: SessionConfig,
    pub opening_question: String,
    pub exchanges: Vec<ExchangeRecord>,
}

impl SessionTranscript {
    pub fn qualities(&self) -> Vec<f64> {
        self.exchanges.iter().map(|e| e.score.composite).collect()
    }

    /// Actions chosen for follow-up questions, in order.
    pub fn actions(&self) -> Vec<ActionType> {
        self.exchanges.iter().filter_map(|e| e.next_action).collect()
    }

    /// One JSON object per exchange, each tagged with the session id.
    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        #[derive(Serialize)]
        struct Line<'a> {
            session_id: &'a str,
            status: SessionStatus,
            #[serde(flatten)]
            exchange: &'a ExchangeRecord,
        }
        let mut body = Vec::new();
        for e in &self.exchanges {
            let line = Line { session_id: &self.session_id, status: self.status, exchange: e };
            serde_json::to_writer(&mut body, &line).expect("exchange serializes");
            body.push(b'\n');
        }
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&body).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone)]
pub struct ConversationSession {
    id: String,
    config: SessionConfig,
    status: SessionStatus,
    opening_question: String,
    current_question: Option<String>,
    current_action: Option<ActionType>,
    exchanges: Vec<ExchangeRecord>,
    table: Option<EvTable>,
    rng: ChaCha8Rng,
    transcript: Option<SessionTranscript>,
}

impl ConversationSession {
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn status(&self) -> SessionStatus {
        self.status
    }

    /// Number of responses received so far.
    pub fn t(&self) -> u32 {
        self.exchanges.len() as u32
    }

    pub fn opening_question(&self) -> &str {
        &self.opening_question
    }

    /// The question awaiting an answer; `None` once the session is over.
    pub fn current_question(&self) -> Option<&str> {
        self.current_question.as_deref()
    }

    pub fn current_action(&self) -> Option<ActionType> {
        self.current_action
    }

    pub fn exchanges(&self) -> &[ExchangeRecord] {
        &self.exchanges
    }

    /// The session's EV table; dropped when the session ends.
    pub fn table(&self) -> Option<&EvTable> {
        self.table.as_ref()
    }

    fn transcript(&self) -> SessionTranscript {
        SessionTranscript {
            session_id: self.id.clone(),
            status: self.status,
            config: self.config.clone(),
            opening_question: self.opening_question.clone(),
            exchanges: self.exchanges.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub record: ExchangeRecord,
    pub next_question: Option<String>,
    pub status: SessionStatus,
}

/// Shared, read-only parts of the system: the prior table, the scorer and
/// the question generator.
#[derive(Clone)]
pub struct Engine {
    prior: Arc<EvTable>,
    scorer: Arc<LsdeScorer>,
    generator: Arc<dyn QuestionGenerator>,
}

impl fmt::Debug for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Engine").field("scorer", &self.scorer).finish_non_exhaustive()
    }
}

impl Engine {
    pub fn new(prior: Arc<EvTable>, scorer: Arc<LsdeScorer>, generator: Arc<dyn QuestionGenerator>) -> Result<Self> {
        if prior.provenance() != Provenance::Prior {
            return Err(Error::Contract("the engine needs a prior table, not a session copy".into()));
        }
        Ok(Engine { prior, scorer, generator })
    }

    /// Default scorer and template questions.
    pub fn with_prior(prior: EvTable) -> Result<Self> {
        Engine::new(Arc::new(prior), Arc::new(LsdeScorer::default()), Arc::new(TemplateGenerator))
    }

    pub fn prior(&self) -> &EvTable {
        &self.prior
    }

    pub fn scorer(&self) -> &LsdeScorer {
        &self.scorer
    }

    pub fn start_session(&self, id: impl Into<String>, config: SessionConfig) -> Result<ConversationSession> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let opening = opening_question(config.topic.as_deref(), rng.random());
        let id = id.into();
        tracing::debug!(session = %id, horizon = config.horizon, schedule = %config.schedule, "session started");
        Ok(ConversationSession {
            id,
            status: SessionStatus::Active,
            current_question: Some(opening.clone()),
            current_action: None,
            opening_question: opening,
            exchanges: Vec::new(),
            table: Some(self.prior.fork_session()),
            rng,
            transcript: None,
            config,
        })
    }

    /// Processes one response. On error the session is left unchanged.
    pub fn step(&self, session: &mut ConversationSession, response: &str) -> Result<StepOutcome> {
        if session.status != SessionStatus::Active {
            return Err(Error::SessionClosed { session_id: session.id.clone(), status: session.status.to_string() });
        }
        let t = session.t() + 1;
        let mut table = session.table.clone().expect("active sessions own a table");
        let mut rng = session.rng.clone();

        // 1. score
        let scored = self.scorer.score(response)?;
        let q = scored.score.composite;
        let prev = session.exchanges.last();
        let dq = delta_q(q, prev.map(|p| p.score.composite));

        // 2. reward the previous decision
        let mut reward = None;
        let mut ev_update = None;
        if let Some(prev) = prev {
            let r = q - prev.score.composite;
            reward = Some(r);
            if session.config.policy == PolicyKind::Adaptive {
                let (s, a) = (prev.state, prev.next_action.expect("non-final exchanges record an action"));
                let before = table.value(s, a);
                let after = crate::policy::update_ev(&mut table, s, a, r, session.config.alpha)?;
                ev_update = Some(EvUpdate { state: s, action: a, before, after });
            }
        }

        // 3. state
        let state = assign_state(q, dq)?;

        // 4-5. next action and question
        let mut record = ExchangeRecord {
            t,
            question: session.current_question.clone().unwrap_or_default(),
            question_action: session.current_action,
            response: response.to_string(),
            score: scored.score,
            flags: scored.flags,
            degraded: scored.degraded,
            delta_q: dq,
            state,
            reward,
            ev_update,
            next_action: None,
            epsilon: None,
            explored: None,
            baseline_weights: None,
            ev_row: None,
            next_question: None,
            generator_fallback: false,
        };
        let status = if t >= session.config.horizon {
            SessionStatus::Completed
        } else {
            let action = match &session.config.policy {
                PolicyKind::Adaptive => {
                    let eps = session.config.schedule.epsilon_at(t)?;
                    record.ev_row = Some(table.row(state));
                    let sel = select_action(&table, state, eps, &mut rng)?;
                    record.epsilon = Some(eps);
                    record.explored = Some(sel.explored);
                    sel.action
                }
                PolicyKind::Baseline { weights } => {
                    let policy = BaselinePolicy::new(*weights)?;
                    record.baseline_weights = Some(policy.weights());
                    policy.sample(&mut rng)
                }
            };
            let context = session
                .exchanges
                .iter()
                .map(|e| ContextExchange { question: e.question.clone(), response: e.response.clone() })
                .chain(std::iter::once(ContextExchange {
                    question: record.question.clone(),
                    response: record.response.clone(),
                }));
            let directive = QuestionDirective::new(
                action,
                context,
                session.config.topic.clone(),
                session.config.role.clone(),
                rng.random(),
            );
            let generated = generate_question(&directive, self.generator.as_ref());
            record.next_action = Some(action);
            record.next_question = Some(generated.text);
            record.generator_fallback = generated.fallback;
            SessionStatus::Active
        };

        tracing::info!(
            session = %session.id,
            t,
            q,
            %state,
            reward = ?record.reward,
            epsilon = ?record.epsilon,
            explored = ?record.explored,
            action = ?record.next_action,
            "exchange"
        );

        session.table = Some(table);
        session.rng = rng;
        session.current_question = record.next_question.clone();
        session.current_action = record.next_action;
        session.status = status;
        session.exchanges.push(record.clone());
        Ok(StepOutcome { next_question: record.next_question.clone(), record, status })
    }

    /// Closes the session (terminated if still active), drops its EV table
    /// and returns the transcript. Repeated calls return the same transcript.
    pub fn end_session(&self, session: &mut ConversationSession) -> SessionTranscript {
        if let Some(t) = &session.transcript {
            return t.clone();
        }
        if session.status == SessionStatus::Active {
            session.status = SessionStatus::Terminated;
        }
        session.current_question = None;
        session.current_action = None;
        session.table = None;
        let transcript = session.transcript();
        tracing::debug!(session = %session.id, status = %session.status, t = session.t(), "session ended");
        session.transcript = Some(transcript.clone());
        transcript
    }

    /// Replays a list of responses through a fresh session.
    pub fn replay(&self, id: &str, config: SessionConfig, responses: &[&str]) -> Result<SessionTranscript> {
        let mut session = self.start_session(id, config)?;
        for r in responses {
            if session.status() != SessionStatus::Active {
                break;
            }
            self.step(&mut session, r)?;
        }
        Ok(self.end_session(&mut session))
    }
}
