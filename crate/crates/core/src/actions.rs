//! Follow-up action types and question intent labelling.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::llm::{extract_json_object, ChatMessage, ChatModel};

/// The five follow-up question intents, in tie-breaking order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionType {
    /// Requests concrete examples or particular cases.
    Specification,
    /// Asks for deeper description of the current topic.
    Elaboration,
    /// Introduces a related but new dimension.
    TopicProbe,
    /// Acknowledges the contribution without asking for more.
    Validation,
    /// Minimal open prompt that leaves direction to the respondent.
    Continuation,
}

impl ActionType {
    pub const ALL: [ActionType; 5] = [
        ActionType::Specification,
        ActionType::Elaboration,
        ActionType::TopicProbe,
        ActionType::Validation,
        ActionType::Continuation,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<ActionType> {
        ActionType::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ActionType::Specification => "specification",
            ActionType::Elaboration => "elaboration",
            ActionType::TopicProbe => "topic_probe",
            ActionType::Validation => "validation",
            ActionType::Continuation => "continuation",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            ActionType::Specification => "Specification",
            ActionType::Elaboration => "Elaboration",
            ActionType::TopicProbe => "Topic Probe",
            ActionType::Validation => "Validation",
            ActionType::Continuation => "Continuation",
        }
    }
}

impl fmt::Display for ActionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ActionType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_lowercase().replace([' ', '-'], "_");
        ActionType::ALL
            .into_iter()
            .find(|a| a.as_str() == norm)
            .ok_or_else(|| Error::InvalidInput(format!("unknown action type {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentLabel {
    pub primary: ActionType,
    #[serde(default)]
    pub secondary: BTreeSet<ActionType>,
    pub confidence: f64,
    #[serde(default)]
    pub rationale: String,
}

impl IntentLabel {
    pub fn new(
        primary: ActionType,
        secondary: impl IntoIterator<Item = ActionType>,
        confidence: f64,
        rationale: impl Into<String>,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::InvalidInput(format!("confidence {confidence} outside [0, 1]")));
        }
        let mut secondary: BTreeSet<ActionType> = secondary.into_iter().collect();
        secondary.remove(&primary);
        Ok(IntentLabel { primary, secondary, confidence, rationale: rationale.into() })
    }
}

pub trait IntentClassifier: Send + Sync {
    fn classify(&self, question: &str) -> Result<IntentLabel>;
}

pub fn classify_question(question: &str, classifier: &dyn IntentClassifier) -> Result<IntentLabel> {
    if question.trim().is_empty() {
        return Err(Error::InvalidInput("question text is empty".into()));
    }
    classifier.classify(question)
}

const VALIDATION_CUES: &[&str] = &[
    "thank you", "thanks for", "thanks so much", "appreciate", "that's valuable", "your perspective is",
    "that makes sense", "i hear you", "great point", "that's helpful",
];
const CONTINUATION_CUES: &[&str] = &["anything else", "go on", "what else", "anything more", "keep going"];
const SPECIFICATION_CUES: &[&str] = &[
    "specific", "example", "instance", "particular", "concrete", "a time when", "describe a time",
    "how satisfied", "on a scale", " rate ",
];
const ELABORATION_CUES: &[&str] = &[
    "tell me more", "more about", "expand", "elaborate", "go deeper", "say more", "why do", "why did",
    "why is", "why are", "why does", "in what way", "what made",
];

/// Deterministic keyword rules. Total: anything that matches no cue is a
/// topic probe. A closing "and why?" does not make a request an elaboration;
/// only why-questions do.
#[derive(Debug, Clone, Copy, Default)]
pub struct KeywordClassifier;

impl KeywordClassifier {
    fn matched(question: &str) -> Vec<ActionType> {
        let q = question.to_lowercase().replace('’', "'");
        let has = |cues: &[&str]| cues.iter().any(|c| q.contains(c));
        let asks = q.contains('?')
            || ["could you", "can you", "would you", "tell me", "share", "describe", "what ", "how "]
                .iter()
                .any(|c| q.contains(c));
        let mut out = Vec::new();
        if has(VALIDATION_CUES) {
            out.push(ActionType::Validation);
        }
        if has(CONTINUATION_CUES) {
            out.push(ActionType::Continuation);
        }
        if has(SPECIFICATION_CUES) {
            out.push(ActionType::Specification);
        }
        if has(ELABORATION_CUES) || q.trim_start().starts_with("why") {
            out.push(ActionType::Elaboration);
        }
        // Acknowledgment followed by a request: the request is the primary intent.
        if out.first() == Some(&ActionType::Validation) && asks {
            out.remove(0);
            if out.is_empty() {
                out.push(ActionType::TopicProbe);
            }
            out.push(ActionType::Validation);
        }
        out
    }
}

impl IntentClassifier for KeywordClassifier {
    fn classify(&self, question: &str) -> Result<IntentLabel> {
        let matched = Self::matched(question);
        let (primary, confidence, rationale) = match matched.first() {
            Some(&a) => (a, 0.6, format!("keyword rule for {a}")),
            None => (ActionType::TopicProbe, 0.3, "no cue matched; defaulting to topic probe".to_string()),
        };
        IntentLabel::new(primary, matched.into_iter().skip(1), confidence, rationale)
    }
}

pub const CLASSIFICATION_PROMPT: &str = "You label follow-up questions asked by a survey chatbot. \
Categories:\n\
- specification: requests concrete examples, particular cases or a specific evaluation (narrows focus)\n\
- elaboration: asks the respondent to expand on the current topic, their reasoning or feelings\n\
- topic_probe: introduces a related but new dimension of the respondent's experience\n\
- validation: acknowledges the respondent's contribution without requesting new information\n\
- continuation: a minimal open invitation to keep talking, without specifying direction\n\
Identify the question's primary intent (its dominant illocutionary force) and any secondary intents. \
Reply with only a JSON object: {\"primary\": <category>, \"secondary\": [<category>...], \
\"confidence\": <0..1>, \"reasoning\": <one short sentence>}";

#[derive(Deserialize)]
struct LlmLabel {
    primary: String,
    #[serde(default)]
    secondary: Vec<String>,
    confidence: f64,
    #[serde(default, alias = "rationale")]
    reasoning: String,
}

/// Classifier that asks a chat model for a structured label.
pub struct LlmIntentClassifier {
    model: Arc<dyn ChatModel>,
    temperature: f64,
}

impl LlmIntentClassifier {
    pub fn new(model: Arc<dyn ChatModel>) -> Self {
        LlmIntentClassifier { model, temperature: 0.0 }
    }

    pub fn parse_reply(reply: &str) -> Result<IntentLabel> {
        let fail = |message: String| Error::Classification { message, raw: reply.to_string() };
        let json = extract_json_object(reply).ok_or_else(|| fail("no JSON object in reply".into()))?;
        let parsed: LlmLabel = serde_json::from_str(json).map_err(|e| fail(e.to_string()))?;
        let primary: ActionType = parsed.primary.parse().map_err(|e: Error| fail(e.to_string()))?;
        let secondary = parsed
            .secondary
            .iter()
            .map(|s| s.parse::<ActionType>())
            .collect::<Result<Vec<_>>>()
            .map_err(|e| fail(e.to_string()))?;
        IntentLabel::new(primary, secondary, parsed.confidence, parsed.reasoning).map_err(|e| fail(e.to_string()))
    }
}

impl IntentClassifier for LlmIntentClassifier {
    fn classify(&self, question: &str) -> Result<IntentLabel> {
        let messages = [ChatMessage::system(CLASSIFICATION_PROMPT), ChatMessage::user(question)];
        let reply = self.model.complete(&messages, self.temperature)?;
        Self::parse_reply(&reply)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionShare {
    pub count: usize,
    pub fraction: f64,
}

/// Primary-intent counts and fractions. Types that never occur are absent.
pub fn distribution<'a>(labels: impl IntoIterator<Item = &'a IntentLabel>) -> BTreeMap<ActionType, ActionShare> {
    action_distribution(labels.into_iter().map(|l| l.primary))
}

pub fn action_distribution(actions: impl IntoIterator<Item = ActionType>) -> BTreeMap<ActionType, ActionShare> {
    let mut counts: BTreeMap<ActionType, usize> = BTreeMap::new();
    let mut total = 0usize;
    for a in actions {
        *counts.entry(a).or_default() += 1;
        total += 1;
    }
    counts
        .into_iter()
        .map(|(a, count)| (a, ActionShare { count, fraction: count as f64 / total as f64 }))
        .collect()
}

/// One line of a labeled-question file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledQuestion {
    pub question: String,
    pub primary: ActionType,
    #[serde(default)]
    pub secondary: Vec<ActionType>,
    pub confidence: f64,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub rationale: String,
}

impl LabeledQuestion {
    pub fn new(question: impl Into<String>, label: &IntentLabel) -> Self {
        LabeledQuestion {
            question: question.into(),
            primary: label.primary,
            secondary: label.secondary.iter().copied().collect(),
            confidence: label.confidence,
            rationale: label.rationale.clone(),
        }
    }

    pub fn label(&self) -> Result<IntentLabel> {
        IntentLabel::new(self.primary, self.secondary.iter().copied(), self.confidence, self.rationale.clone())
    }
}

pub fn read_labeled_questions(path: &Path) -> Result<Vec<LabeledQuestion>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (idx, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: LabeledQuestion =
            serde_json::from_str(&line).map_err(|e| Error::parse(path, idx + 1, e.to_string()))?;
        rec.label().map_err(|e| Error::parse(path, idx + 1, e.to_string()))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_labeled_questions(path: &Path, records: &[LabeledQuestion]) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
    for r in records {
        let line = serde_json::to_string(r).expect("label serializes");
        writeln!(file, "{line}").map_err(|e| Error::io(path, e))?;
    }
    file.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn primary(q: &str) -> ActionType {
        classify_question(q, &KeywordClassifier).unwrap().primary
    }

    #[test]
    fn taxonomy_examples() {
        assert_eq!(
            primary("Could you share how satisfied you are with your academic program and why?"),
            ActionType::Specification
        );
        assert_eq!(
            primary("Could you share more about the challenges you've faced in Greek life?"),
            ActionType::Elaboration
        );
        assert_eq!(
            primary("How comfortable do you feel on campus, and have you experienced moments of inclusion or exclusion?"),
            ActionType::TopicProbe
        );
        assert_eq!(
            primary("Thank you for sharing that. Your perspective is valuable and helps us understand student experiences."),
            ActionType::Validation
        );
        assert_eq!(
            primary("Is there anything else you'd like to share about your experiences at MU?"),
            ActionType::Continuation
        );
    }

    #[test]
    fn compound_question_keeps_acknowledgment_as_secondary() {
        let l = classify_question(
            "Thank you for sharing that. Could you tell me about a particular instance when this happened?",
            &KeywordClassifier,
        )
        .unwrap();
        assert_eq!(l.primary, ActionType::Specification);
        assert!(l.secondary.contains(&ActionType::Validation));
        assert!(!l.secondary.contains(&l.primary));
    }

    #[test]
    fn empty_question_rejected() {
        assert!(classify_question("  ", &KeywordClassifier).is_err());
    }

    #[test]
    fn distribution_of_prior_corpus_counts() {
        let counts = [(ActionType::Specification, 291), (ActionType::Elaboration, 110), (ActionType::TopicProbe, 60),
            (ActionType::Validation, 4), (ActionType::Continuation, 2)];
        let labels: Vec<IntentLabel> = counts
            .iter()
            .flat_map(|&(a, n)| std::iter::repeat_n(IntentLabel::new(a, [], 1.0, "").unwrap(), n))
            .collect();
        let d = distribution(&labels);
        let pct: Vec<f64> = ActionType::ALL.iter().map(|a| (d[a].fraction * 1000.0).round() / 10.0).collect();
        assert_eq!(pct, [62.3, 23.6, 12.8, 0.9, 0.4]);
        assert!((d.values().map(|s| s.fraction).sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn distribution_edge_cases() {
        assert!(distribution(&[]).is_empty());
        let one = [IntentLabel::new(ActionType::Validation, [], 0.5, "").unwrap()];
        assert_eq!(distribution(&one)[&ActionType::Validation].fraction, 1.0);
        let uniform: Vec<IntentLabel> = ActionType::ALL
            .iter()
            .flat_map(|&a| std::iter::repeat_n(IntentLabel::new(a, [], 1.0, "").unwrap(), 20))
            .collect();
        assert!(distribution(&uniform).values().all(|s| s.fraction == 0.2));
    }

    #[test]
    fn llm_reply_parsing() {
        let l = LlmIntentClassifier::parse_reply(
            "```json\n{\"primary\": \"topic probe\", \"secondary\": [\"validation\"], \"confidence\": 0.8, \"reasoning\": \"new area\"}\n```",
        )
        .unwrap();
        assert_eq!(l.primary, ActionType::TopicProbe);
        assert_eq!(l.secondary, BTreeSet::from([ActionType::Validation]));

        let err = LlmIntentClassifier::parse_reply("I think it's a validation.").unwrap_err();
        match err {
            Error::Classification { raw, .. } => assert_eq!(raw, "I think it's a validation."),
            other => panic!("unexpected {other:?}"),
        }
        assert!(LlmIntentClassifier::parse_reply("{\"primary\": \"greeting\", \"confidence\": 0.5}").is_err());
        assert!(LlmIntentClassifier::parse_reply("{\"primary\": \"validation\", \"confidence\": 2}").is_err());
    }

    #[test]
    fn label_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("labels.jsonl");
        let label = IntentLabel::new(ActionType::Elaboration, [ActionType::Validation], 0.7, "why").unwrap();
        let recs = vec![LabeledQuestion::new("Why was that hard?", &label)];
        write_labeled_questions(&p, &recs).unwrap();
        let back = read_labeled_questions(&p).unwrap();
        assert_eq!(back, recs);
        assert_eq!(back[0].label().unwrap(), label);

        std::fs::write(&p, "{\"question\": \"q\", \"primary\": \"nope\", \"confidence\": 1}\n").unwrap();
        assert!(matches!(read_labeled_questions(&p), Err(Error::Parse { line: 1, .. })));
    }
}
