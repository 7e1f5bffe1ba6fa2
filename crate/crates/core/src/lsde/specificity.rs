//! Deterministic detector for episodic detail: who/what, when and where.

use std::collections::HashSet;
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;

use super::{SpecificityDetector, SpecificityFlags};
use crate::error::{Error, Result};
use crate::text::strip_edges;

const WEEKDAYS: &[&str] = &["monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"];

// "may" and "march" only count when capitalized mid-sentence.
const MONTHS: &[&str] = &[
    "january", "february", "march", "april", "may", "june", "july", "august", "september",
    "october", "november", "december",
];

const DEFAULT_TEMPORAL: &[&str] = &[
    "yesterday", "today", "tonight", "tomorrow", "overnight", "weekend", "midterm", "midterms",
    "finals", "semester", "noon", "midnight",
];

const TIME_UNITS: &[&str] = &[
    "week", "weeks", "month", "months", "year", "years", "semester", "semesters", "term",
    "terms", "night", "nights", "weekend", "day", "days", "morning", "evening", "afternoon",
    "fall", "spring", "summer", "winter", "quarter", "session", "class", "time", "hour", "hours",
];

const DEFAULT_PLACES: &[&str] = &[
    "hall", "campus", "library", "dorm", "dorms", "building", "room", "classroom", "lab",
    "office", "cafeteria", "gym", "center", "union", "quad", "apartment", "house", "stadium",
    "lecture", "auditorium",
];

const LOCATION_PREPOSITIONS: &[&str] = &["in", "at", "on", "near"];
const DETERMINERS: &[&str] = &["the", "a", "an", "my", "our", "their", "his", "her", "your", "this", "that"];

static YEAR: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b(19|20)\d{2}\b").unwrap());
static CLOCK: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b\d{1,2}(:\d{2})\b|\b\d{1,2}\s?(am|pm|a\.m\.|p\.m\.)").unwrap());
static COURSE_CODE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b[A-Z]{2,5}\s?\d{3,4}[A-Z]?\b").unwrap());

/// Lexicon-and-pattern detector. Deterministic and thread-safe.
#[derive(Debug, Clone)]
pub struct RuleSpecificityDetector {
    places: HashSet<String>,
    temporal: HashSet<String>,
}

impl Default for RuleSpecificityDetector {
    fn default() -> Self {
        RuleSpecificityDetector {
            places: DEFAULT_PLACES.iter().map(|s| s.to_string()).collect(),
            temporal: DEFAULT_TEMPORAL.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl RuleSpecificityDetector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Replaces the place and relative-time lexicons with plain word lists
    /// (one entry per line, `#` comments allowed).
    pub fn from_lexicon_files(places: Option<&Path>, temporal: Option<&Path>) -> Result<Self> {
        let mut det = Self::default();
        if let Some(p) = places {
            det.places = read_word_list(p)?;
        }
        if let Some(p) = temporal {
            det.temporal = read_word_list(p)?;
        }
        Ok(det)
    }

    pub fn flags(&self, text: &str) -> SpecificityFlags {
        let words = Words::new(text);
        SpecificityFlags {
            entities: self.has_entity(text, &words),
            temporal: self.has_temporal(text, &words),
            spatial: self.has_spatial(&words),
        }
    }

    fn has_temporal(&self, text: &str, words: &Words) -> bool {
        if YEAR.is_match(text) || CLOCK.is_match(text) {
            return true;
        }
        for (i, w) in words.lower.iter().enumerate() {
            if self.temporal.contains(w) || WEEKDAYS.contains(&w.as_str()) || is_month(words, i) {
                return true;
            }
            let next = words.lower.get(i + 1).map(String::as_str);
            if matches!(w.as_str(), "last" | "next" | "this") {
                if let Some(n) = next {
                    if TIME_UNITS.contains(&n) || WEEKDAYS.contains(&n) {
                        return true;
                    }
                }
            }
            if w == "ago" && i > 0 && TIME_UNITS.contains(&words.lower[i - 1].as_str()) {
                return true;
            }
        }
        false
    }

    fn has_spatial(&self, words: &Words) -> bool {
        for (i, w) in words.lower.iter().enumerate() {
            if !LOCATION_PREPOSITIONS.contains(&w.as_str()) || words.ends_sentence[i] {
                continue;
            }
            let mut j = i + 1;
            if j < words.len() && DETERMINERS.contains(&words.lower[j].as_str()) && !words.ends_sentence[j] {
                j += 1;
            }
            if j >= words.len() {
                continue;
            }
            let candidate = &words.lower[j];
            if self.places.contains(candidate) {
                return true;
            }
            if words.capitalized[j] && !is_calendar_word(candidate) && candidate != "i" {
                return true;
            }
        }
        false
    }

    fn has_entity(&self, text: &str, words: &Words) -> bool {
        if COURSE_CODE.is_match(text) {
            return true;
        }
        for i in 0..words.len() {
            let w = &words.lower[i];
            if words.alnum_code[i] {
                return true;
            }
            if !words.capitalized[i] || words.sentence_initial[i] {
                continue;
            }
            if is_first_person_i(w) || is_calendar_word(w) {
                continue;
            }
            return true;
        }
        false
    }
}

impl SpecificityDetector for RuleSpecificityDetector {
    fn detect(&self, text: &str) -> Result<SpecificityFlags> {
        Ok(self.flags(text))
    }
}

struct Words {
    lower: Vec<String>,
    capitalized: Vec<bool>,
    sentence_initial: Vec<bool>,
    ends_sentence: Vec<bool>,
    alnum_code: Vec<bool>,
}

impl Words {
    fn new(text: &str) -> Self {
        let mut w = Words {
            lower: Vec::new(),
            capitalized: Vec::new(),
            sentence_initial: Vec::new(),
            ends_sentence: Vec::new(),
            alnum_code: Vec::new(),
        };
        let mut at_start = true;
        for chunk in text.split_whitespace() {
            let core = strip_edges(chunk);
            let ends = chunk.trim_end_matches(['"', '\'', ')', ']']).ends_with(['.', '!', '?', ':', ';']);
            if core.is_empty() {
                if ends {
                    at_start = true;
                }
                continue;
            }
            w.lower.push(core.to_lowercase());
            w.capitalized.push(core.chars().next().is_some_and(char::is_uppercase));
            w.sentence_initial.push(at_start);
            w.ends_sentence.push(ends);
            w.alnum_code.push(is_letters_then_digits(core));
            at_start = ends;
        }
        w
    }

    fn len(&self) -> usize {
        self.lower.len()
    }
}

fn is_month(words: &Words, i: usize) -> bool {
    let w = words.lower[i].as_str();
    if !MONTHS.contains(&w) {
        return false;
    }
    if w == "may" || w == "march" {
        words.capitalized[i] && !words.sentence_initial[i]
    } else {
        true
    }
}

fn is_calendar_word(w: &str) -> bool {
    WEEKDAYS.contains(&w) || MONTHS.contains(&w)
}

fn is_first_person_i(w: &str) -> bool {
    matches!(w, "i" | "i'm" | "i've" | "i'd" | "i'll" | "i’m" | "i’ve" | "i’d" | "i’ll")
}

// e.g. "EECS280", "cs101"
fn is_letters_then_digits(word: &str) -> bool {
    let letters = word.chars().take_while(|c| c.is_ascii_alphabetic()).count();
    let rest = &word[letters..];
    letters >= 2 && rest.len() >= 2 && rest.chars().all(|c| c.is_ascii_digit())
}

fn read_word_list(path: &Path) -> Result<HashSet<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect())
}
