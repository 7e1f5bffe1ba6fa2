//! Response-quality scoring on four dimensions: Length, Specificity,
//! self-Disclosure and Emotion.
//!
//! Every dimension is normalized to [0, 1]:
//!
//! * length: `min(words / 29, 1)`
//! * disclosure: `min(first-person pronouns / 3, 1)`
//! * emotion: `|compound valence|`
//! * specificity: `(entities + temporal + spatial) / 3`
//!
//! and combined as `0.20·L + 0.20·D + 0.35·E + 0.25·S`.

mod specificity;
pub mod vader;

use std::fmt;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

pub use specificity::RuleSpecificityDetector;
pub use vader::{Polarity, VaderScorer};

use crate::error::{Error, Result};
use crate::text::ResponseText;

/// Word count at which length credit saturates (75th percentile of the
/// historical responses).
pub const LENGTH_CAP_WORDS: usize = 29;

/// First-person pronoun count at which disclosure credit saturates.
pub const PRONOUN_CAP: usize = 3;

pub const FIRST_PERSON_PRONOUNS: [&str; 10] =
    ["i", "me", "my", "mine", "myself", "we", "us", "our", "ours", "ourselves"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub length: f64,
    pub disclosure: f64,
    pub emotion: f64,
    pub specificity: f64,
}

pub const WEIGHTS: Weights = Weights { length: 0.20, disclosure: 0.20, emotion: 0.35, specificity: 0.25 };

/// Source of a compound valence in [-1, 1].
pub trait SentimentScorer: Send + Sync {
    fn compound(&self, text: &str) -> Result<f64>;

    /// Scorers that return `false` are called under a lock.
    fn is_concurrency_safe(&self) -> bool {
        true
    }
}

pub trait SpecificityDetector: Send + Sync {
    fn detect(&self, text: &str) -> Result<SpecificityFlags>;

    fn is_concurrency_safe(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecificityFlags {
    pub entities: bool,
    pub temporal: bool,
    pub spatial: bool,
}

impl SpecificityFlags {
    pub fn new(entities: bool, temporal: bool, spatial: bool) -> Self {
        SpecificityFlags { entities, temporal, spatial }
    }

    pub fn total(&self) -> u8 {
        self.entities as u8 + self.temporal as u8 + self.spatial as u8
    }

    pub fn normalized(&self) -> f64 {
        f64::from(self.total()) / 3.0
    }
}

/// The four normalized dimensions and the weighted composite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LsdeScore {
    pub length: f64,
    pub specificity: f64,
    pub disclosure: f64,
    pub emotion: f64,
    pub composite: f64,
}

impl LsdeScore {
    pub fn from_dimensions(length: f64, disclosure: f64, emotion: f64, specificity: f64) -> Result<Self> {
        let composite = composite(length, disclosure, emotion, specificity)?;
        Ok(LsdeScore { length, specificity, disclosure, emotion, composite })
    }

    pub fn zero() -> Self {
        LsdeScore { length: 0.0, specificity: 0.0, disclosure: 0.0, emotion: 0.0, composite: 0.0 }
    }
}

pub fn normalize_length(text: &ResponseText) -> f64 {
    (text.word_count() as f64 / LENGTH_CAP_WORDS as f64).min(1.0)
}

pub fn count_first_person(text: &ResponseText) -> usize {
    text.tokens().iter().filter(|t| FIRST_PERSON_PRONOUNS.contains(&t.as_str())).count()
}

pub fn score_disclosure(text: &ResponseText) -> f64 {
    (count_first_person(text) as f64 / PRONOUN_CAP as f64).min(1.0)
}

/// Magnitude of the compound valence of the raw (case-preserved) text.
pub fn score_emotion(text: &ResponseText, sentiment: &dyn SentimentScorer) -> Result<f64> {
    let compound = sentiment.compound(text.raw())?;
    if !(-1.0..=1.0).contains(&compound) {
        return Err(Error::Scoring {
            dimension: "emotion",
            message: format!("compound valence {compound} outside [-1, 1]"),
        });
    }
    Ok(compound.abs())
}

pub fn score_specificity(
    text: &ResponseText,
    detector: &dyn SpecificityDetector,
) -> Result<(SpecificityFlags, f64)> {
    let flags = detector.detect(text.raw())?;
    Ok((flags, flags.normalized()))
}

/// Weighted composite; every input must lie in [0, 1].
pub fn composite(length: f64, disclosure: f64, emotion: f64, specificity: f64) -> Result<f64> {
    for (name, v) in [
        ("length", length),
        ("disclosure", disclosure),
        ("emotion", emotion),
        ("specificity", specificity),
    ] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidInput(format!("{name} score {v} outside [0, 1]")));
        }
    }
    let q = WEIGHTS.length * length
        + WEIGHTS.disclosure * disclosure
        + WEIGHTS.emotion * emotion
        + WEIGHTS.specificity * specificity;
    Ok(q.clamp(0.0, 1.0))
}

/// Reporting buckets, lower-inclusive: [0,.2) [.2,.4) [.4,.6) [.6,.8) [.8,1].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QualityBucket {
    VeryLow,
    Low,
    Medium,
    High,
    VeryHigh,
}

impl QualityBucket {
    pub const ALL: [QualityBucket; 5] =
        [QualityBucket::VeryLow, QualityBucket::Low, QualityBucket::Medium, QualityBucket::High, QualityBucket::VeryHigh];

    pub fn of(q: f64) -> QualityBucket {
        if q < 0.2 {
            QualityBucket::VeryLow
        } else if q < 0.4 {
            QualityBucket::Low
        } else if q < 0.6 {
            QualityBucket::Medium
        } else if q < 0.8 {
            QualityBucket::High
        } else {
            QualityBucket::VeryHigh
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            QualityBucket::VeryLow => "Very Low",
            QualityBucket::Low => "Low",
            QualityBucket::Medium => "Medium",
            QualityBucket::High => "High",
            QualityBucket::VeryHigh => "Very High",
        }
    }
}

/// Counts per bucket, in bucket order.
pub fn bucket_counts(scores: impl IntoIterator<Item = f64>) -> [usize; 5] {
    let mut counts = [0usize; 5];
    for q in scores {
        counts[QualityBucket::of(q) as usize] += 1;
    }
    counts
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoringMode {
    /// Scorer and detector failures are returned as errors.
    #[default]
    Strict,
    /// Failed dimensions score 0.0 and the result is flagged as degraded.
    Lenient,
}

impl fmt::Display for ScoringMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScoringMode::Strict => "strict",
            ScoringMode::Lenient => "lenient",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredResponse {
    pub score: LsdeScore,
    pub flags: SpecificityFlags,
    pub word_count: usize,
    pub pronoun_count: usize,
    /// Dimensions that were zeroed because their scorer failed.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub degraded: Vec<String>,
}

/// Full scorer: tokenization plus the two pluggable dimensions.
#[derive(Clone)]
pub struct LsdeScorer {
    sentiment: Arc<dyn SentimentScorer>,
    detector: Arc<dyn SpecificityDetector>,
    mode: ScoringMode,
    sentiment_lock: Option<Arc<Mutex<()>>>,
    detector_lock: Option<Arc<Mutex<()>>>,
}

impl fmt::Debug for LsdeScorer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LsdeScorer").field("mode", &self.mode).finish_non_exhaustive()
    }
}

impl Default for LsdeScorer {
    fn default() -> Self {
        LsdeScorer::new(Arc::new(VaderScorer::new()), Arc::new(RuleSpecificityDetector::new()))
    }
}

impl LsdeScorer {
    pub fn new(sentiment: Arc<dyn SentimentScorer>, detector: Arc<dyn SpecificityDetector>) -> Self {
        let sentiment_lock = (!sentiment.is_concurrency_safe()).then(|| Arc::new(Mutex::new(())));
        let detector_lock = (!detector.is_concurrency_safe()).then(|| Arc::new(Mutex::new(())));
        LsdeScorer { sentiment, detector, mode: ScoringMode::Strict, sentiment_lock, detector_lock }
    }

    pub fn with_mode(mut self, mode: ScoringMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn mode(&self) -> ScoringMode {
        self.mode
    }

    pub fn score(&self, raw: &str) -> Result<ScoredResponse> {
        let text = ResponseText::new(raw);
        let mut degraded = Vec::new();

        let length = normalize_length(&text);
        let disclosure = score_disclosure(&text);

        let emotion = {
            let _guard = self.sentiment_lock.as_ref().map(|m| m.lock().unwrap_or_else(|p| p.into_inner()));
            score_emotion(&text, self.sentiment.as_ref())
        };
        let emotion = self.recover(emotion, "emotion", &mut degraded, 0.0)?;

        let spec = {
            let _guard = self.detector_lock.as_ref().map(|m| m.lock().unwrap_or_else(|p| p.into_inner()));
            score_specificity(&text, self.detector.as_ref())
        };
        let (flags, specificity) =
            self.recover(spec, "specificity", &mut degraded, (SpecificityFlags::default(), 0.0))?;

        let score = LsdeScore::from_dimensions(length, disclosure, emotion, specificity)?;
        Ok(ScoredResponse {
            score,
            flags,
            word_count: text.word_count(),
            pronoun_count: count_first_person(&text),
            degraded,
        })
    }

    fn recover<T>(&self, r: Result<T>, dimension: &'static str, degraded: &mut Vec<String>, fallback: T) -> Result<T> {
        match (r, self.mode) {
            (Ok(v), _) => Ok(v),
            (Err(e), ScoringMode::Strict) => Err(match e {
                Error::Scoring { .. } => e,
                other => Error::Scoring { dimension, message: other.to_string() },
            }),
            (Err(e), ScoringMode::Lenient) => {
                tracing::warn!(dimension, error = %e, "scorer failed; dimension set to 0");
                degraded.push(dimension.to_string());
                Ok(fallback)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Fixed(f64);
    impl SentimentScorer for Fixed {
        fn compound(&self, _: &str) -> Result<f64> {
            Ok(self.0)
        }
    }

    struct Failing;
    impl SentimentScorer for Failing {
        fn compound(&self, _: &str) -> Result<f64> {
            Err(Error::Llm("offline".into()))
        }
    }
    impl SpecificityDetector for Failing {
        fn detect(&self, _: &str) -> Result<SpecificityFlags> {
            Err(Error::Llm("offline".into()))
        }
    }

    struct Flags(SpecificityFlags);
    impl SpecificityDetector for Flags {
        fn detect(&self, _: &str) -> Result<SpecificityFlags> {
            Ok(self.0)
        }
        fn is_concurrency_safe(&self) -> bool {
            false
        }
    }

    fn words(n: usize) -> ResponseText {
        ResponseText::new(vec!["word"; n].join(" "))
    }

    #[test]
    fn length_cap() {
        assert_eq!(normalize_length(&words(29)), 1.0);
        assert_eq!(normalize_length(&words(58)), 1.0);
        assert!((normalize_length(&words(10)) - 10.0 / 29.0).abs() < 1e-15);
        assert_eq!(normalize_length(&words(0)), 0.0);
    }

    #[test]
    fn disclosure_examples() {
        assert_eq!(score_disclosure(&"I think my advisor helped me".into()), 1.0);
        assert_eq!(score_disclosure(&"The campus is large".into()), 0.0);
        assert!((score_disclosure(&"we met".into()) - 1.0 / 3.0).abs() < 1e-15);
        // whole tokens only, case-insensitive
        assert_eq!(count_first_person(&"Mine! OURS. myself, Usher, mystery".into()), 3);
    }

    #[test]
    fn emotion_is_magnitude() {
        assert!((score_emotion(&"x".into(), &Fixed(-0.8)).unwrap() - 0.8).abs() < 1e-15);
        assert_eq!(score_emotion(&"".into(), &VaderScorer::new()).unwrap(), 0.0);
        assert!(score_emotion(&"x".into(), &Fixed(1.5)).is_err());
    }

    #[test]
    fn specificity_from_flags() {
        let (_, s) = score_specificity(&"x".into(), &Flags(SpecificityFlags::default())).unwrap();
        assert_eq!(s, 0.0);
        let (_, s) = score_specificity(&"x".into(), &Flags(SpecificityFlags::new(true, true, true))).unwrap();
        assert_eq!(s, 1.0);
        let (_, s) = score_specificity(&"x".into(), &Flags(SpecificityFlags::new(true, false, true))).unwrap();
        assert_eq!(s, 2.0 / 3.0);
    }

    #[test]
    fn composite_examples() {
        assert_eq!(composite(0.0, 0.0, 0.0, 0.0).unwrap(), 0.0);
        assert!((composite(1.0, 1.0, 1.0, 1.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((composite(1.0, 1.0, 0.0, 0.0).unwrap() - 0.40).abs() < 1e-12);
        assert!(composite(1.2, 0.0, 0.0, 0.0).is_err());
        assert!(composite(0.0, -0.1, 0.0, 0.0).is_err());
        assert!(composite(f64::NAN, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn weights_sum_to_one() {
        let w = WEIGHTS;
        assert!((w.length + w.disclosure + w.emotion + w.specificity - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bucket_edges_are_lower_inclusive() {
        assert_eq!(QualityBucket::of(0.0), QualityBucket::VeryLow);
        assert_eq!(QualityBucket::of(0.199999), QualityBucket::VeryLow);
        assert_eq!(QualityBucket::of(0.2), QualityBucket::Low);
        assert_eq!(QualityBucket::of(0.4), QualityBucket::Medium);
        assert_eq!(QualityBucket::of(0.6), QualityBucket::High);
        assert_eq!(QualityBucket::of(0.8), QualityBucket::VeryHigh);
        assert_eq!(QualityBucket::of(1.0), QualityBucket::VeryHigh);
    }

    #[test]
    fn strict_mode_surfaces_failures() {
        let s = LsdeScorer::new(Arc::new(Failing), Arc::new(RuleSpecificityDetector::new()));
        assert!(matches!(s.score("hello there"), Err(Error::Scoring { dimension: "emotion", .. })));
        let s = LsdeScorer::new(Arc::new(VaderScorer::new()), Arc::new(Failing));
        assert!(matches!(s.score("hello there"), Err(Error::Scoring { dimension: "specificity", .. })));
    }

    #[test]
    fn lenient_mode_zeroes_and_flags() {
        let s = LsdeScorer::new(Arc::new(Failing), Arc::new(Failing)).with_mode(ScoringMode::Lenient);
        let r = s.score("I love my dorm").unwrap();
        assert_eq!(r.score.emotion, 0.0);
        assert_eq!(r.score.specificity, 0.0);
        assert_eq!(r.degraded, ["emotion", "specificity"]);
        assert!(r.score.length > 0.0);
    }

    #[test]
    fn non_concurrent_plugins_are_serialized() {
        let s = LsdeScorer::new(Arc::new(Fixed(0.5)), Arc::new(Flags(SpecificityFlags::new(true, false, false))));
        assert!(s.detector_lock.is_some());
        assert!(s.sentiment_lock.is_none());
        let handles: Vec<_> = (0..4)
            .map(|_| {
                let s = s.clone();
                std::thread::spawn(move || s.score("we went").unwrap().score.composite)
            })
            .collect();
        let results: Vec<f64> = handles.into_iter().map(|h| h.join().unwrap()).collect();
        assert!(results.windows(2).all(|w| w[0] == w[1]));
    }
}
