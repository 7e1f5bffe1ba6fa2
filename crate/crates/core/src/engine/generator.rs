use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::actions::ActionType;
use crate::error::{Error, Result};
use crate::llm::{ChatMessage, ChatModel};

/// At most this many previous exchanges are passed to a generator.
pub const MAX_CONTEXT: usize = 3;
pub const GENERATION_TEMPERATURE: f64 = 0.7;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextExchange {
    pub question: String,
    pub response: String,
}

/// What the next question must do, plus the recent conversation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionDirective {
    pub action: ActionType,
    context: Vec<ContextExchange>,
    pub topic: Option<String>,
    pub role: Option<String>,
    /// Selects among equivalent template phrasings.
    pub variant: u64,
}

impl QuestionDirective {
    /// Keeps only the last [`MAX_CONTEXT`] exchanges.
    pub fn new(
        action: ActionType,
        context: impl IntoIterator<Item = ContextExchange>,
        topic: Option<String>,
        role: Option<String>,
        variant: u64,
    ) -> Self {
        let mut context: Vec<ContextExchange> = context.into_iter().collect();
        if context.len() > MAX_CONTEXT {
            context.drain(..context.len() - MAX_CONTEXT);
        }
        QuestionDirective { action, context, topic, role, variant }
    }

    pub fn context(&self) -> &[ContextExchange] {
        &self.context
    }

    fn last_response(&self) -> Option<&str> {
        self.context.last().map(|c| c.response.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedQuestion {
    pub text: String,
    /// The primary generator failed and a template was used instead.
    pub fallback: bool,
}

pub trait QuestionGenerator: Send + Sync {
    fn generate(&self, directive: &QuestionDirective) -> Result<GeneratedQuestion>;
}

/// Runs `generator`, falling back to templates on failure or an empty reply.
pub fn generate_question(directive: &QuestionDirective, generator: &dyn QuestionGenerator) -> GeneratedQuestion {
    match generator.generate(directive) {
        Ok(q) if !q.text.trim().is_empty() => q,
        Ok(_) => {
            tracing::warn!(action = %directive.action, "generator returned an empty question; using template");
            GeneratedQuestion { text: TemplateGenerator.render(directive), fallback: true }
        }
        Err(e) => {
            tracing::warn!(action = %directive.action, error = %e, "generator failed; using template");
            GeneratedQuestion { text: TemplateGenerator.render(directive), fallback: true }
        }
    }
}

// (needle, display name) pairs used to name what the respondent was talking about.
const TOPIC_CUES: &[(&str, &str)] = &[
    ("greek life", "Greek life"),
    ("fraternit", "Greek life"),
    ("sororit", "Greek life"),
    ("dorm", "residence life"),
    ("residence hall", "residence life"),
    ("roommate", "residence life"),
    ("dining", "dining"),
    ("cafeteria", "dining"),
    ("advis", "advising"),
    ("professor", "your classes"),
    ("class", "your classes"),
    ("lecture", "your classes"),
    ("club", "student clubs"),
    ("athletic", "athletics"),
    ("sport", "athletics"),
    ("counseling", "counseling services"),
    ("library", "the library"),
    ("financial aid", "financial aid"),
    ("parking", "parking"),
];

/// Names a campus topic mentioned in `text`, if any.
pub fn detect_topic(text: &str) -> Option<&'static str> {
    let lower = text.to_lowercase();
    TOPIC_CUES.iter().find(|(cue, _)| lower.contains(cue)).map(|(_, name)| *name)
}

const OPENINGS: [&str; 3] = [
    "To start, how would you describe your overall experience on campus so far?",
    "Let's begin: what has campus life been like for you this year?",
    "First, how would you describe the climate on campus from where you stand?",
];

/// Opening prompt for a new session. It precedes the first scored exchange
/// and carries no action type.
pub fn opening_question(topic: Option<&str>, variant: u64) -> String {
    match topic.map(str::trim).filter(|t| !t.is_empty()) {
        Some(t) => format!("To start, how would you describe your experience with {t} on campus?"),
        None => OPENINGS[(variant % OPENINGS.len() as u64) as usize].to_string(),
    }
}

const SPECIFICATION: [&str; 3] = [
    "Could you give me a specific example of when that happened?",
    "Can you describe a particular moment that stands out, like where or when it happened?",
    "What is one concrete example that shows what you mean?",
];
const ELABORATION: [&str; 4] = [
    "Can you tell me more about why that matters to you?",
    "Why do you think you feel that way?",
    "What made that experience stand out for you?",
    "Could you elaborate on how that affected you?",
];
const TOPIC_PROBE: [&str; 5] = [
    "How would you describe the academic climate here, like classes and advising?",
    "How about the social side of campus, do you feel you have a place to belong?",
    "How welcoming does campus feel to students from different backgrounds?",
    "What has your experience been with campus resources such as tutoring or career services?",
    "How well do you feel campus supports students' mental health and wellbeing?",
];
const TOPIC_BRIDGE: [&str; 2] = [
    "Thanks for explaining that. Looking past {topic}, how connected do you feel to the wider campus community?",
    "Beyond {topic}, how would you describe your sense of belonging in the wider campus community, in classes or clubs?",
];
const VALIDATION: [&str; 4] = [
    "Thank you for sharing that, I really appreciate your honesty.",
    "That's helpful to hear, and your perspective is valuable.",
    "I appreciate you taking the time to explain that.",
    "Thank you, that makes sense and it helps a lot.",
];
const CONTINUATION: [&str; 4] = [
    "Anything else you'd like to add?",
    "Please go on, I'm listening.",
    "What else comes to mind about that?",
    "Is there anything else on your mind?",
];

/// Deterministic phrasings from fixed per-action pools.
#[derive(Debug, Clone, Copy, Default)]
pub struct TemplateGenerator;

impl TemplateGenerator {
    pub fn render(&self, d: &QuestionDirective) -> String {
        let pick = |pool: &[&str]| pool[(d.variant % pool.len() as u64) as usize].to_string();
        match d.action {
            ActionType::Specification => pick(&SPECIFICATION),
            ActionType::Elaboration => pick(&ELABORATION),
            ActionType::TopicProbe => {
                let topic = d.last_response().and_then(detect_topic).map(str::to_string).or_else(|| d.topic.clone());
                match topic {
                    Some(t) => pick(&TOPIC_BRIDGE).replace("{topic}", &t),
                    None => pick(&TOPIC_PROBE),
                }
            }
            ActionType::Validation => pick(&VALIDATION),
            ActionType::Continuation => pick(&CONTINUATION),
        }
    }
}

impl QuestionGenerator for TemplateGenerator {
    fn generate(&self, directive: &QuestionDirective) -> Result<GeneratedQuestion> {
        Ok(GeneratedQuestion { text: self.render(directive), fallback: false })
    }
}

fn instruction(action: ActionType) -> &'static str {
    match action {
        ActionType::Specification => {
            "Ask for one concrete example or specific instance of what they described, inviting details such as when, where or who was involved."
        }
        ActionType::Elaboration => {
            "Ask them to go deeper on what they just said: their reasoning, or how it made them feel."
        }
        ActionType::TopicProbe => {
            "Move to a related campus climate dimension (academic, social, diversity, resources or mental health). Connect it explicitly to what was just discussed."
        }
        ActionType::Validation => {
            "Briefly acknowledge and thank them for what they shared. Keep it under 20 words and do not ask a new question."
        }
        ActionType::Continuation => "Write a minimal prompt that invites them to keep going, 5-10 words.",
    }
}

/// Asks a chat model for the next question; falls back to templates.
pub struct LlmQuestionGenerator {
    model: Arc<dyn ChatModel>,
    temperature: f64,
}

impl LlmQuestionGenerator {
    pub fn new(model: Arc<dyn ChatModel>) -> Self {
        LlmQuestionGenerator { model, temperature: GENERATION_TEMPERATURE }
    }

    pub fn messages(d: &QuestionDirective) -> Vec<ChatMessage> {
        let mut system = String::from(
            "You are a friendly interviewer running an anonymous campus climate survey. \
             Reply with exactly one conversational message to the respondent and nothing else.",
        );
        if let Some(role) = &d.role {
            system.push_str(&format!(" The respondent is a {role}."));
        }
        if let Some(topic) = &d.topic {
            system.push_str(&format!(" The survey topic is {topic}."));
        }
        let mut user = String::from("Recent conversation:\n");
        for c in d.context() {
            user.push_str(&format!("Interviewer: {}\nRespondent: {}\n", c.question, c.response));
        }
        user.push_str(&format!("\nNext message type: {}.\n{}", d.action.title(), instruction(d.action)));
        vec![ChatMessage::system(system), ChatMessage::user(user)]
    }
}

impl QuestionGenerator for LlmQuestionGenerator {
    fn generate(&self, d: &QuestionDirective) -> Result<GeneratedQuestion> {
        let reply = self.model.complete(&Self::messages(d), self.temperature)?;
        let text = reply.trim().trim_matches('"').trim().to_string();
        if text.is_empty() {
            return Err(Error::Llm("empty question".into()));
        }
        Ok(GeneratedQuestion { text, fallback: false })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actions::{IntentClassifier, KeywordClassifier};
    use crate::text::ResponseText;

    fn directive(action: ActionType, last: &str, variant: u64) -> QuestionDirective {
        let ctx = vec![ContextExchange { question: "How is campus?".into(), response: last.into() }];
        QuestionDirective::new(action, ctx, None, None, variant)
    }

    #[test]
    fn context_window_is_capped() {
        let ctx = (0..5).map(|i| ContextExchange { question: format!("q{i}"), response: format!("r{i}") });
        let d = QuestionDirective::new(ActionType::Elaboration, ctx, None, None, 0);
        assert_eq!(d.context().len(), 3);
        assert_eq!(d.context()[0].question, "q2");
    }

    #[test]
    fn template_lengths() {
        for v in 0..8 {
            let val = TemplateGenerator.render(&directive(ActionType::Validation, "fine", v));
            assert!(ResponseText::new(val.as_str()).word_count() < 20, "{val}");
            let cont = TemplateGenerator.render(&directive(ActionType::Continuation, "fine", v));
            let n = ResponseText::new(cont.as_str()).word_count();
            assert!((5..=10).contains(&n), "{cont}: {n}");
        }
    }

    #[test]
    fn topic_probe_bridges_from_greek_life() {
        let last = "Greek life here feels really exclusive if you're not in a fraternity.";
        for v in 0..4 {
            let q = TemplateGenerator.render(&directive(ActionType::TopicProbe, last, v));
            assert!(q.contains("Greek life") && q.contains("campus community"), "{q}");
        }
    }

    #[test]
    fn templates_carry_their_own_intent() {
        for a in ActionType::ALL {
            for v in 0..6 {
                let q = TemplateGenerator.render(&directive(a, "it is fine", v));
                assert_eq!(KeywordClassifier.classify(&q).unwrap().primary, a, "{q}");
            }
        }
    }

    struct Broken;
    impl QuestionGenerator for Broken {
        fn generate(&self, _: &QuestionDirective) -> Result<GeneratedQuestion> {
            Err(Error::Llm("timeout".into()))
        }
    }

    #[test]
    fn failure_falls_back_and_flags() {
        let d = directive(ActionType::Specification, "fine", 1);
        let q = generate_question(&d, &Broken);
        assert!(q.fallback);
        assert_eq!(q.text, TemplateGenerator.render(&d));
    }

    #[test]
    fn opening_uses_topic() {
        assert!(opening_question(Some("housing"), 0).contains("housing"));
        assert_eq!(opening_question(None, 4), OPENINGS[1]);
    }
}
