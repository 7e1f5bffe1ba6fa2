//! Adaptive conversational-survey engine.
//!
//! Each free-text answer is scored on four response-quality dimensions
//! (length, specificity, self-disclosure, emotion), the composite quality and
//! its change are discretized into one of five engagement states, and the
//! next follow-up question type is chosen by an ε-greedy policy over an
//! expected-value table that is initialized from historical conversations and
//! refined online within a single session.
//!
//! Module map:
//!
//! * [`text`] – tokenization shared by every scorer.
//! * [`lsde`] – per-dimension scoring, the composite and the VADER port.
//! * [`states`] – engagement-state assignment.
//! * [`actions`] – the five follow-up action types and question labelling.
//! * [`policy`] – expected-value table, priors, ε-greedy selection, updates.
//! * [`corpus`] – log ingestion, cleaning, exchange-pair extraction, stats.
//! * [`engine`] – live sessions and question generation.
//! * [`sim`] – simulated users and the controlled experiment harness.
//! * [`stats`] – t-test, Cohen's d and Cohen's κ.

pub mod actions;
pub mod config;
pub mod corpus;
pub mod engine;
mod error;
pub mod llm;
pub mod lsde;
pub mod policy;
pub mod sim;
pub mod states;
pub mod stats;
pub mod text;

pub use actions::{ActionType, IntentLabel};
pub use engine::{ConversationSession, SessionConfig, SessionStatus};
pub use error::{Error, Result};
pub use lsde::{LsdeScore, LsdeScorer};
pub use policy::{EpsilonSchedule, EvTable, ExchangePair};
pub use states::EngagementState;
