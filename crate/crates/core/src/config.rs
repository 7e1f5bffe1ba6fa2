//! Flat `key = value` configuration files.
//!
//! ```text
//! # engine
//! horizon = 15
//! alpha = 0.3
//! epsilon = decay:0.40:0.05:15
//! generator = templates
//! scorer_mode = strict
//! # service
//! bind = 127.0.0.1:8080
//! admin_token = change-me
//! prior_table = data/priors.tsv
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. Unknown keys and
//! repeated keys are errors. Command-line flags override file values.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::llm::LlmConfig;
use crate::lsde::ScoringMode;
use crate::policy::EpsilonSchedule;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorMode {
    #[default]
    Templates,
    Llm,
}

impl FromStr for GeneratorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "templates" | "template" => Ok(GeneratorMode::Templates),
            "llm" => Ok(GeneratorMode::Llm),
            other => Err(Error::InvalidInput(format!("unknown generator mode {other:?}"))),
        }
    }
}

impl fmt::Display for GeneratorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GeneratorMode::Templates => "templates",
            GeneratorMode::Llm => "llm",
        })
    }
}

impl FromStr for ScoringMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "strict" => Ok(ScoringMode::Strict),
            "lenient" => Ok(ScoringMode::Lenient),
            other => Err(Error::InvalidInput(format!("unknown scorer mode {other:?}"))),
        }
    }
}

/// Every recognised key; all optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub horizon: Option<u32>,
    pub alpha: Option<f64>,
    pub epsilon: Option<EpsilonSchedule>,
    pub generator: Option<GeneratorMode>,
    pub scorer_mode: Option<ScoringMode>,
    pub vader_lexicon: Option<PathBuf>,
    pub places_lexicon: Option<PathBuf>,
    pub temporal_lexicon: Option<PathBuf>,
    pub prior_table: Option<PathBuf>,
    pub transcript_dir: Option<PathBuf>,
    pub bind: Option<String>,
    pub admin_token: Option<String>,
    pub cors_origin: Option<String>,
    pub seed: Option<u64>,
    pub llm_endpoint: Option<String>,
    pub llm_model: Option<String>,
    pub llm_timeout_secs: Option<u64>,
    pub llm_api_key_env: Option<String>,
}

pub const KEYS: [&str; 18] = [
    "horizon",
    "alpha",
    "epsilon",
    "generator",
    "scorer_mode",
    "vader_lexicon",
    "places_lexicon",
    "temporal_lexicon",
    "prior_table",
    "transcript_dir",
    "bind",
    "admin_token",
    "cors_origin",
    "seed",
    "llm_endpoint",
    "llm_model",
    "llm_timeout_secs",
    "llm_api_key_env",
];

impl Settings {
    pub fn load(path: &Path) -> Result<Settings> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Settings::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Settings> {
        let mut seen = BTreeMap::new();
        let mut s = Settings::default();
        for (idx, line) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(path, lineno, "expected key = value"))?;
            let (key, value) = (key.trim(), value.trim());
            if let Some(prev) = seen.insert(key.to_string(), lineno) {
                return Err(Error::parse(path, lineno, format!("{key} already set on line {prev}")));
            }
            s.set(key, value).map_err(|e| Error::parse(path, lineno, e.to_string()))?;
        }
        Ok(s)
    }

    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::InvalidInput(format!("{key}: cannot parse {v:?}")))
        }
        let text = || Some(value.to_string());
        let path = || Some(PathBuf::from(value));
        match key {
            "horizon" => self.horizon = Some(num(key, value)?),
            "alpha" => self.alpha = Some(num(key, value)?),
            "epsilon" => self.epsilon = Some(value.parse()?),
            "generator" => self.generator = Some(value.parse()?),
            "scorer_mode" => self.scorer_mode = Some(value.parse()?),
            "vader_lexicon" => self.vader_lexicon = path(),
            "places_lexicon" => self.places_lexicon = path(),
            "temporal_lexicon" => self.temporal_lexicon = path(),
            "prior_table" => self.prior_table = path(),
            "transcript_dir" => self.transcript_dir = path(),
            "bind" => self.bind = text(),
            "admin_token" => self.admin_token = text(),
            "cors_origin" => self.cors_origin = text(),
            "seed" => self.seed = Some(num(key, value)?),
            "llm_endpoint" => self.llm_endpoint = text(),
            "llm_model" => self.llm_model = text(),
            "llm_timeout_secs" => self.llm_timeout_secs = Some(num(key, value)?),
            "llm_api_key_env" => self.llm_api_key_env = text(),
            other => return Err(Error::InvalidInput(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    pub fn llm_config(&self) -> LlmConfig {
        let mut c = LlmConfig::default();
        if let Some(v) = &self.llm_endpoint {
            c.endpoint = v.clone();
        }
        if let Some(v) = &self.llm_model {
            c.model = v.clone();
        }
        if let Some(v) = self.llm_timeout_secs {
            c.timeout_secs = v;
        }
        if let Some(v) = &self.llm_api_key_env {
            c.api_key_env = v.clone();
        }
        c
    }
}
