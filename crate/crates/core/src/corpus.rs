//! Historical conversation logs: ingestion, cleaning, exchange-pair
//! extraction and descriptive statistics.
//!
//! Input is newline-delimited JSON, one exchange per line:
//! `{"conversation_id": "c1", "turn": 1, "chatbot": "...", "user": "..."}`.
//! `chatbot` is the question that preceded `user`.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::actions::{ActionType, IntentClassifier};
use crate::error::{Error, Result};
use crate::lsde::LsdeScorer;
use crate::policy::ExchangePair;
use crate::states::{assign_state, delta_q, EngagementState};
use crate::text::ResponseText;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawExchangeRecord {
    pub conversation_id: String,
    pub turn: u32,
    pub chatbot: String,
    pub user: String,
}

impl RawExchangeRecord {
    pub fn new(conversation_id: impl Into<String>, turn: u32, chatbot: impl Into<String>, user: impl Into<String>) -> Self {
        RawExchangeRecord { conversation_id: conversation_id.into(), turn, chatbot: chatbot.into(), user: user.into() }
    }
}

// Ids may be numbers in exported logs.
#[derive(Deserialize)]
struct WireRecord {
    conversation_id: serde_json::Value,
    turn: u32,
    #[serde(default)]
    chatbot: Option<String>,
    #[serde(default)]
    user: Option<String>,
}

/// Parses a log. Blank lines are skipped; a malformed line, a missing id or
/// a turn that does not increase within its conversation is an error naming
/// the line. Missing text fields become empty strings (and are removed by
/// [`clean`]).
pub fn parse_log(text: &str, path: &Path) -> Result<Vec<RawExchangeRecord>> {
    let mut out = Vec::new();
    let mut last_turn: BTreeMap<String, u32> = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let wire: WireRecord =
            serde_json::from_str(line).map_err(|e| Error::parse(path, lineno, format!("malformed record: {e}")))?;
        let conversation_id = match wire.conversation_id {
            serde_json::Value::String(s) if !s.trim().is_empty() => s,
            serde_json::Value::Number(n) => n.to_string(),
            other => return Err(Error::parse(path, lineno, format!("bad conversation_id {other}"))),
        };
        if let Some(prev) = last_turn.get(&conversation_id) {
            if wire.turn <= *prev {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("turn {} does not follow turn {prev} in conversation {conversation_id}", wire.turn),
                ));
            }
        }
        last_turn.insert(conversation_id.clone(), wire.turn);
        out.push(RawExchangeRecord {
            conversation_id,
            turn: wire.turn,
            chatbot: wire.chatbot.unwrap_or_default(),
            user: wire.user.unwrap_or_default(),
        });
    }
    Ok(out)
}

pub fn read_log(path: &Path) -> Result<Vec<RawExchangeRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_log(&text, path)
}

pub fn write_log(path: &Path, records: &[RawExchangeRecord]) -> Result<()> {
    let mut body = String::new();
    for r in records {
        body.push_str(&serde_json::to_string(r).expect("record serializes"));
        body.push('\n');
    }
    std::fs::write(path, body).map_err(|e| Error::io(path, e))
}

const PLACEHOLDERS: [&str; 3] = ["nan", "n/a", "null"];

/// Empty after trimming, or a null-like export artifact.
pub fn is_placeholder(s: &str) -> bool {
    let t = s.trim();
    t.is_empty() || PLACEHOLDERS.iter().any(|p| t.eq_ignore_ascii_case(p))
}

/// Drops records with a missing or placeholder side, user responses with no
/// word, and repeats of an earlier user response in the same conversation.
/// Order is preserved.
pub fn clean(records: &[RawExchangeRecord]) -> Vec<RawExchangeRecord> {
    let mut seen: HashSet<(&str, &str)> = HashSet::new();
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        if is_placeholder(&r.chatbot) || is_placeholder(&r.user) {
            continue;
        }
        if ResponseText::new(r.user.as_str()).word_count() == 0 {
            continue;
        }
        if !seen.insert((r.conversation_id.as_str(), r.user.as_str())) {
            continue;
        }
        out.push(r.clone());
    }
    out
}

/// Records grouped by conversation id (sorted), each group sorted by turn.
pub fn conversations(records: &[RawExchangeRecord]) -> BTreeMap<&str, Vec<&RawExchangeRecord>> {
    let mut map: BTreeMap<&str, Vec<&RawExchangeRecord>> = BTreeMap::new();
    for r in records {
        map.entry(r.conversation_id.as_str()).or_default().push(r);
    }
    for group in map.values_mut() {
        group.sort_by_key(|r| r.turn);
    }
    map
}

/// One scored response with its state, as seen during pair extraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredTurn {
    pub conversation_id: String,
    pub turn: u32,
    pub quality: f64,
    pub delta: f64,
    pub state: EngagementState,
    /// Primary intent of the question that preceded this response.
    pub question_action: ActionType,
}

/// Scores every response and labels every question.
pub fn score_turns(
    records: &[RawExchangeRecord],
    scorer: &LsdeScorer,
    classifier: &dyn IntentClassifier,
) -> Result<Vec<ScoredTurn>> {
    let mut out = Vec::with_capacity(records.len());
    for (id, group) in conversations(records) {
        let mut prev: Option<f64> = None;
        for r in group {
            let q = scorer.score(&r.user)?.score.composite;
            let dq = delta_q(q, prev);
            let label = crate::actions::classify_question(&r.chatbot, classifier)?;
            out.push(ScoredTurn {
                conversation_id: id.to_string(),
                turn: r.turn,
                quality: q,
                delta: dq,
                state: assign_state(q, dq)?,
                question_action: label.primary,
            });
            prev = Some(q);
        }
    }
    Ok(out)
}

/// Links each pair of consecutive responses in a conversation through the
/// question asked between them.
pub fn pairs_from_turns(turns: &[ScoredTurn]) -> Vec<ExchangePair> {
    turns
        .windows(2)
        .filter(|w| w[0].conversation_id == w[1].conversation_id)
        .map(|w| ExchangePair {
            state_before: w[0].state,
            action: w[1].question_action,
            q_before: w[0].quality,
            q_after: w[1].quality,
        })
        .collect()
}

pub fn extract_pairs(
    records: &[RawExchangeRecord],
    scorer: &LsdeScorer,
    classifier: &dyn IntentClassifier,
) -> Result<Vec<ExchangePair>> {
    Ok(pairs_from_turns(&score_turns(records, scorer, classifier)?))
}

const PAIRS_HEADER: &str = "state\taction\tq_before\tq_after";

pub fn write_pairs(path: &Path, pairs: &[ExchangePair]) -> Result<()> {
    let mut body = String::from(PAIRS_HEADER);
    body.push('\n');
    for p in pairs {
        let _ = writeln!(body, "{}\t{}\t{}\t{}", p.state_before, p.action, p.q_before, p.q_after);
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(body.as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn read_pairs(path: &Path) -> Result<Vec<ExchangePair>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() || (idx == 0 && line.starts_with("state")) {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 4 {
            return Err(Error::parse(path, lineno, "expected state, action, q_before, q_after"));
        }
        let state = f[0].parse().map_err(|e: Error| Error::parse(path, lineno, e.to_string()))?;
        let action = f[1].parse().map_err(|e: Error| Error::parse(path, lineno, e.to_string()))?;
        let num = |s: &str| s.parse::<f64>().map_err(|_| Error::parse(path, lineno, format!("bad number {s:?}")));
        let pair = ExchangePair::new(state, action, num(f[2])?, num(f[3])?)
            .map_err(|e| Error::parse(path, lineno, e.to_string()))?;
        out.push(pair);
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n_conversations: usize,
    pub n_valid_responses: usize,
    pub n_pairs: usize,
    pub mean_exchanges: f64,
    /// Sample standard deviation.
    pub sd_exchanges: f64,
    pub median_exchanges: f64,
    pub min_exchanges: usize,
    pub max_exchanges: usize,
    pub single_exchange_conversations: usize,
    pub single_exchange_fraction: f64,
    pub mean_response_words: f64,
    pub median_response_words: f64,
}

/// Median with the midpoint rule for even counts; 0 for an empty slice.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Descriptive statistics of a cleaned corpus.
pub fn stats(records: &[RawExchangeRecord]) -> CorpusStats {
    let convs = conversations(records);
    if convs.is_empty() {
        return CorpusStats::default();
    }
    let lengths: Vec<f64> = convs.values().map(|g| g.len() as f64).collect();
    let words: Vec<f64> = records.iter().map(|r| ResponseText::new(r.user.as_str()).word_count() as f64).collect();
    let n_conv = lengths.len();
    let n_resp = records.len();
    let single = lengths.iter().filter(|l| **l == 1.0).count();
    CorpusStats {
        n_conversations: n_conv,
        n_valid_responses: n_resp,
        n_pairs: n_resp - n_conv,
        mean_exchanges: crate::stats::mean(&lengths),
        sd_exchanges: crate::stats::sample_sd(&lengths),
        median_exchanges: median(&lengths),
        min_exchanges: lengths.iter().cloned().fold(f64::INFINITY, f64::min) as usize,
        max_exchanges: lengths.iter().cloned().fold(0.0, f64::max) as usize,
        single_exchange_conversations: single,
        single_exchange_fraction: single as f64 / n_conv as f64,
        mean_response_words: crate::stats::mean(&words),
        median_response_words: median(&words),
    }
}

impl CorpusStats {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "Conversations                {}", self.n_conversations);
        let _ = writeln!(s, "Valid responses              {}", self.n_valid_responses);
        let _ = writeln!(s, "Exchange pairs               {}", self.n_pairs);
        let _ = writeln!(s, "Exchanges per conversation   {:.1} ± {:.1}", self.mean_exchanges, self.sd_exchanges);
        let _ = writeln!(s, "Median exchanges             {}", self.median_exchanges);
        let _ = writeln!(s, "Range                        {}-{}", self.min_exchanges, self.max_exchanges);
        let _ = writeln!(
            s,
            "Single-exchange              {} ({:.1}%)",
            self.single_exchange_conversations,
            100.0 * self.single_exchange_fraction
        );
        let _ = writeln!(s, "Mean response words          {:.1}", self.mean_response_words);
        let _ = writeln!(s, "Median response words        {}", self.median_response_words);
        s
    }
}

const DEMO_QUESTIONS: [&str; 10] = [
    "How would you describe your overall experience on campus?",
    "Could you give me a specific example of when that happened?",
    "Tell me more about how that made you feel.",
    "How about the academic side of campus life, like advising or classes?",
    "Thank you for sharing that, I really appreciate your honesty.",
    "Anything else you'd like to add?",
    "Can you describe a particular moment in your residence hall?",
    "Why do you think that is?",
    "What about mental health resources on campus?",
    "How satisfied are you with the dining options?",
];

const DEMO_RESPONSES: [&str; 12] = [
    "ok",
    "It's fine I guess",
    "nan",
    "I love the library, especially late at night before exams.",
    "Honestly my first semester was rough and I felt really lonely in the dorms.",
    "not really",
    "Last week in the Student Union I met Professor Garcia and she was incredibly helpful to me.",
    "The food is terrible.",
    "We started a study group in Hamilton Hall on Tuesdays and it changed everything for me and my friends.",
    "N/A",
    "Advising was confusing, I never knew who to ask about my major requirements.",
    "yes",
];

/// A small random log in the input format, including placeholders and
/// repeated responses so that cleaning has something to do.
pub fn synthetic_log(seed: u64, n_conversations: usize, max_turns: u32) -> Vec<RawExchangeRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for c in 0..n_conversations {
        let turns = rng.random_range(1..=max_turns.max(1));
        for t in 1..=turns {
            let q = DEMO_QUESTIONS[rng.random_range(0..DEMO_QUESTIONS.len())];
            let r = DEMO_RESPONSES[rng.random_range(0..DEMO_RESPONSES.len())];
            out.push(RawExchangeRecord::new(format!("conv-{c:04}"), t, q, r));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actions::KeywordClassifier;

    fn rec(c: &str, t: u32, user: &str) -> RawExchangeRecord {
        RawExchangeRecord::new(c, t, "How is campus?", user)
    }

    #[test]
    fn cleaning_rules() {
        let raw = vec![
            rec("a", 1, "N/A"),
            rec("a", 2, "ok"),
            rec("a", 3, "ok"),
            rec("a", 4, " NaN "),
            rec("a", 5, "null"),
            rec("a", 6, "..."),
            rec("b", 1, "ok"),
            RawExchangeRecord::new("b", 2, "nan", "fine"),
        ];
        let cleaned = clean(&raw);
        let kept: Vec<(&str, u32)> = cleaned.iter().map(|r| (r.conversation_id.as_str(), r.turn)).collect();
        assert_eq!(kept, vec![("a", 2), ("b", 1)]);
        assert_eq!(clean(&cleaned), cleaned);
    }

    #[test]
    fn parse_rejects_bad_lines() {
        let p = Path::new("log.jsonl");
        let good = "{\"conversation_id\": 7, \"turn\": 1, \"chatbot\": \"q\", \"user\": \"a\"}\n\n";
        assert_eq!(parse_log(good, p).unwrap()[0].conversation_id, "7");
        let bad = format!("{good}{{\"conversation_id\": \"x\", \"turn\": \"one\"}}\n");
        match parse_log(&bad, p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let backwards = "{\"conversation_id\": \"x\", \"turn\": 2, \"chatbot\": \"q\", \"user\": \"a\"}\n\
                         {\"conversation_id\": \"x\", \"turn\": 2, \"chatbot\": \"q\", \"user\": \"b\"}\n";
        assert!(matches!(parse_log(backwards, p), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn pair_counts() {
        let scorer = LsdeScorer::default();
        let one = vec![rec("a", 1, "hello there")];
        assert!(extract_pairs(&one, &scorer, &KeywordClassifier).unwrap().is_empty());
        let many: Vec<_> = (1..=5).map(|t| rec("b", t, &format!("answer number {t}"))).collect();
        assert_eq!(extract_pairs(&many, &scorer, &KeywordClassifier).unwrap().len(), 4);
    }

    #[test]
    fn pair_links_question_between_responses() {
        let scorer = LsdeScorer::default();
        let log = vec![
            RawExchangeRecord::new("a", 1, "How is campus?", "fine"),
            RawExchangeRecord::new("a", 2, "Thank you for sharing that.", "I really love my classes this year"),
        ];
        let pairs = extract_pairs(&log, &scorer, &KeywordClassifier).unwrap();
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].action, ActionType::Validation);
        let q1 = scorer.score("fine").unwrap().score.composite;
        assert_eq!(pairs[0].q_before, q1);
        assert_eq!(pairs[0].state_before, assign_state(q1, 0.0).unwrap());
    }

    #[test]
    fn stats_small_cases() {
        assert_eq!(stats(&[]), CorpusStats::default());
        let three: Vec<_> = (1..=3).map(|t| rec("a", t, "one two")).collect();
        let s = stats(&three);
        assert_eq!((s.mean_exchanges, s.median_exchanges), (3.0, 3.0));
        assert_eq!(s.n_pairs, 2);
        assert_eq!(median(&[1.0, 2.0, 3.0, 4.0]), 2.5);
    }

    #[test]
    fn synthetic_log_is_deterministic() {
        assert_eq!(synthetic_log(3, 10, 6), synthetic_log(3, 10, 6));
        assert_ne!(synthetic_log(3, 10, 6), synthetic_log(4, 10, 6));
    }
}
