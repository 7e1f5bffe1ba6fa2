//! Word tokenization for response scoring.
//!
//! A word is a whitespace-separated chunk with leading and trailing
//! non-alphanumeric characters removed, lowercased. Chunks that are left empty
//! (a lone dash, an emoji, "...") are not words.

use serde::{Deserialize, Serialize};

/// A user response together with its word tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseText {
    raw: String,
    tokens: Vec<String>,
}

impl ResponseText {
    pub fn new(raw: impl Into<String>) -> Self {
        let raw = raw.into();
        let tokens = tokenize(&raw);
        ResponseText { raw, tokens }
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn word_count(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

impl From<&str> for ResponseText {
    fn from(raw: &str) -> Self {
        ResponseText::new(raw)
    }
}

/// Lowercased words of `raw` with surrounding punctuation stripped.
pub fn tokenize(raw: &str) -> Vec<String> {
    raw.split_whitespace()
        .filter_map(|chunk| {
            let word = strip_edges(chunk);
            (!word.is_empty()).then(|| word.to_lowercase())
        })
        .collect()
}

/// Removes leading and trailing characters that are not letters or digits.
pub(crate) fn strip_edges(chunk: &str) -> &str {
    chunk.trim_matches(|c: char| !c.is_alphanumeric())
}
