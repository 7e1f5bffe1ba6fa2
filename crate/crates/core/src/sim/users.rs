use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::actions::ActionType;
use crate::error::{Error, Result};
use crate::llm::{ChatMessage, ChatModel};

pub const USER_TEMPERATURE: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    BiologySenior,
    PsychologyJunior,
    CsSophomore,
    EnglishSenior,
    Custom(String),
}

impl Profile {
    pub const STANDARD: [Profile; 4] =
        [Profile::BiologySenior, Profile::PsychologyJunior, Profile::CsSophomore, Profile::EnglishSenior];

    pub fn as_str(&self) -> &str {
        match self {
            Profile::BiologySenior => "biology_senior",
            Profile::PsychologyJunior => "psychology_junior",
            Profile::CsSophomore => "cs_sophomore",
            Profile::EnglishSenior => "english_senior",
            Profile::Custom(s) => s,
        }
    }

    /// Persona used to prompt an LLM-backed user.
    pub fn persona(&self) -> String {
        match self {
            Profile::BiologySenior => "a senior majoring in biology. You are science-minded with a moderate engagement \
                style and mostly think about coursework, labs and research opportunities."
                .into(),
            Profile::PsychologyJunior => "a junior majoring in psychology. You are emotionally expressive and pay close \
                attention to relationships and how people treat each other."
                .into(),
            Profile::CsSophomore => "a sophomore majoring in computer science. You are analytical and fairly terse, and \
                you care about academic rigor."
                .into(),
            Profile::EnglishSenior => "a senior majoring in English. You tend to elaborate and you notice campus culture \
                and community."
                .into(),
            Profile::Custom(s) => format!("a student ({s})."),
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Err(Error::InvalidInput("empty profile name".into()));
        }
        Ok(Profile::STANDARD.into_iter().find(|p| p.as_str() == s).unwrap_or_else(|| Profile::Custom(s.to_string())))
    }
}

/// A respondent in a simulated conversation.
pub trait SimulatedUser: Send {
    /// `action` is the intent behind `question` (`None` for the opening)
    /// and `t` the index of the exchange being answered.
    fn respond(&mut self, question: &str, action: Option<ActionType>, t: u32) -> Result<String>;
}

/// Deterministic response rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResponseProgram {
    /// The same text every time.
    Constant { text: String },
    /// `first` on odd exchanges, `second` on even ones.
    Alternating { first: String, second: String },
    /// `rich` after questions of type `best`, `terse` otherwise
    /// (including the opening).
    PreferAction { best: ActionType, rich: String, terse: String },
    /// One text per action (in [`ActionType::ALL`] order) plus the opening.
    ByAction { opening: String, replies: [String; 5] },
    /// A stochastic student whose engagement drifts with the questions asked.
    Persona { profile: Profile },
}

/// Thirty words, first person, emotional, with a time, a place and a name.
pub const RICH_RESPONSE: &str = "Honestly I absolutely loved it. Last semester in Hamilton Hall my friends and I \
started a study group with Professor Reyes, and we felt so welcomed and happy every single week.";
pub const TERSE_RESPONSE: &str = "ok";

impl ResponseProgram {
    pub fn prefers(best: ActionType) -> Self {
        ResponseProgram::PreferAction { best, rich: RICH_RESPONSE.into(), terse: TERSE_RESPONSE.into() }
    }

    pub fn persona(profile: Profile) -> Self {
        ResponseProgram::Persona { profile }
    }
}

#[derive(Debug, Clone, Copy)]
struct Traits {
    base: f64,
    /// Additive engagement change per action, in action order.
    effects: [f64; 5],
    expressiveness: f64,
    detail: f64,
}

fn traits(profile: &Profile) -> Traits {
    match profile {
        Profile::BiologySenior => Traits {
            base: 0.45,
            effects: [-0.03, 0.06, 0.03, 0.07, -0.02],
            expressiveness: 0.5,
            detail: 0.7,
        },
        Profile::PsychologyJunior => Traits {
            base: 0.55,
            effects: [-0.05, 0.08, 0.02, 0.10, 0.01],
            expressiveness: 0.9,
            detail: 0.5,
        },
        Profile::CsSophomore => Traits {
            base: 0.35,
            effects: [0.01, 0.03, 0.05, 0.04, -0.04],
            expressiveness: 0.3,
            detail: 0.8,
        },
        Profile::EnglishSenior => Traits {
            base: 0.60,
            effects: [-0.04, 0.07, 0.05, 0.05, 0.02],
            expressiveness: 0.7,
            detail: 0.6,
        },
        Profile::Custom(_) => Traits {
            base: 0.5,
            effects: [-0.02, 0.05, 0.03, 0.05, 0.0],
            expressiveness: 0.6,
            detail: 0.6,
        },
    }
}

struct PhraseBank {
    subjects: &'static [&'static str],
    names: &'static [&'static str],
    places: &'static [&'static str],
}

fn bank(profile: &Profile) -> PhraseBank {
    match profile {
        Profile::BiologySenior => PhraseBank {
            subjects: &["my research lab", "the biology program", "organic chemistry", "lab sections"],
            names: &["Professor Nguyen", "Dr. Patel", "BIO 340"],
            places: &["the Science Center", "the greenhouse", "the library"],
        },
        Profile::PsychologyJunior => PhraseBank {
            subjects: &["my friends", "the counseling center", "my roommate", "student groups"],
            names: &["Professor Alvarez", "PSY 210", "Maya"],
            places: &["the student union", "my residence hall", "the quad"],
        },
        Profile::CsSophomore => PhraseBank {
            subjects: &["the CS curriculum", "problem sets", "office hours", "the coding club"],
            names: &["CS 201", "Professor Kim", "Dr. Okafor"],
            places: &["the engineering building", "the computer lab", "the library"],
        },
        Profile::EnglishSenior | Profile::Custom(_) => PhraseBank {
            subjects: &["the writing program", "campus traditions", "the literary magazine", "seminars"],
            names: &["Professor Ellis", "ENG 450", "Jordan"],
            places: &["the Arts Quad", "the writing center", "the old chapel"],
        },
    }
}

const TERSE: [&str; 6] = ["ok", "fine I guess", "not really", "it's alright", "yes", "no idea"];
const TIMES: [&str; 5] = ["last semester", "yesterday", "during finals week", "last fall", "every Tuesday"];
const POSITIVE: [&str; 5] = [
    "I really love it",
    "it made me so happy",
    "I felt truly welcomed",
    "honestly it was wonderful",
    "I'm grateful for it",
];
const NEGATIVE: [&str; 5] = [
    "it was really stressful",
    "I felt lonely and frustrated",
    "honestly it hurt",
    "I was so angry about it",
    "it made me anxious",
];
const NEUTRAL: [&str; 5] = [
    "there are a lot of options",
    "it depends on the week",
    "most people seem to manage",
    "the schedule is busy",
    "things have changed over time",
];

pub struct ScriptedUser {
    program: ResponseProgram,
    rng: ChaCha8Rng,
    engagement: f64,
    last_action: Option<ActionType>,
    streak: u32,
}

impl ScriptedUser {
    pub fn new(program: ResponseProgram, seed: u64) -> Self {
        let engagement = match &program {
            ResponseProgram::Persona { profile } => traits(profile).base,
            _ => 0.0,
        };
        ScriptedUser { program, rng: ChaCha8Rng::seed_from_u64(seed), engagement, last_action: None, streak: 0 }
    }

    /// Current latent engagement of a persona user.
    pub fn engagement(&self) -> f64 {
        self.engagement
    }

    fn persona_reply(&mut self, profile: &Profile, action: Option<ActionType>) -> String {
        let tr = traits(profile);
        let noise = Normal::new(0.0, 0.06).expect("valid sd").sample(&mut self.rng);
        if let Some(a) = action {
            if self.last_action == Some(a) {
                self.streak += 1;
            } else {
                self.streak = 0;
            }
            self.last_action = Some(a);
            // acknowledgment helps most when engagement is low
            let effect = match a {
                ActionType::Validation => tr.effects[a.index()] * (1.5 - self.engagement),
                _ => tr.effects[a.index()],
            };
            let fatigue = 0.04 * f64::from(self.streak);
            self.engagement += 0.2 * (tr.base - self.engagement) + effect - fatigue + noise;
        } else {
            self.engagement += noise;
        }
        self.engagement = self.engagement.clamp(0.0, 1.0);
        compose(&mut self.rng, profile, self.engagement, &tr)
    }
}

fn compose(rng: &mut ChaCha8Rng, profile: &Profile, e: f64, tr: &Traits) -> String {
    if e < 0.15 {
        return TERSE.choose(rng).expect("non-empty").to_string();
    }
    let b = bank(profile);
    let target_words = (3.0 + 38.0 * e + rng.random_range(-3.0..3.0)).max(3.0) as usize;
    let mut parts: Vec<String> = Vec::new();
    let subject = *b.subjects.choose(rng).expect("non-empty");
    parts.push(if rng.random_bool((e * 1.2).min(1.0)) {
        format!("For me {subject} has been a big part of campus life")
    } else {
        format!("{subject} is okay")
    });
    if rng.random_bool((e * tr.expressiveness).min(1.0)) {
        let pool = if rng.random_bool(0.65) { &POSITIVE } else { &NEGATIVE };
        parts.push(pool.choose(rng).expect("non-empty").to_string());
    }
    if rng.random_bool((e * tr.detail).min(1.0)) {
        parts.push(format!("{} at {}", TIMES.choose(rng).expect("non-empty"), b.places.choose(rng).expect("non-empty")));
    }
    if rng.random_bool((e * tr.detail * 0.8).min(1.0)) {
        parts.push(format!("I worked with {}", b.names.choose(rng).expect("non-empty")));
    }
    let mut words: usize = parts.iter().map(|p| p.split_whitespace().count()).sum();
    while words < target_words {
        let extra = if rng.random_bool(e.min(1.0) * 0.5) {
            format!("my friends and I think {}", NEUTRAL.choose(rng).expect("non-empty"))
        } else {
            NEUTRAL.choose(rng).expect("non-empty").to_string()
        };
        words += extra.split_whitespace().count();
        parts.push(extra);
    }
    let mut text = parts.join(", ");
    if let Some(first) = text.get(..1) {
        text = first.to_uppercase() + &text[1..];
    }
    text.push('.');
    text
}

impl SimulatedUser for ScriptedUser {
    fn respond(&mut self, _question: &str, action: Option<ActionType>, t: u32) -> Result<String> {
        let text = match &self.program {
            ResponseProgram::Constant { text } => text.clone(),
            ResponseProgram::Alternating { first, second } => {
                if t % 2 == 1 {
                    first.clone()
                } else {
                    second.clone()
                }
            }
            ResponseProgram::PreferAction { best, rich, terse } => {
                if action == Some(*best) {
                    rich.clone()
                } else {
                    terse.clone()
                }
            }
            ResponseProgram::ByAction { opening, replies } => match action {
                Some(a) => replies[a.index()].clone(),
                None => opening.clone(),
            },
            ResponseProgram::Persona { profile } => {
                let profile = profile.clone();
                self.persona_reply(&profile, action)
            }
        };
        Ok(text)
    }
}

/// A chat model role-playing a student.
pub struct LlmUser {
    model: Arc<dyn ChatModel>,
    history: Vec<ChatMessage>,
    temperature: f64,
}

impl LlmUser {
    pub fn new(model: Arc<dyn ChatModel>, profile: &Profile) -> Self {
        let system = format!(
            "You are {} You are answering an anonymous campus climate survey chatbot. Reply in your own voice \
             with a single message, as a real student would; you may be brief or detailed.",
            profile.persona()
        );
        LlmUser { model, history: vec![ChatMessage::system(system)], temperature: USER_TEMPERATURE }
    }
}

impl SimulatedUser for LlmUser {
    fn respond(&mut self, question: &str, _action: Option<ActionType>, _t: u32) -> Result<String> {
        // roles are mirrored: the survey bot speaks as "user"
        self.history.push(ChatMessage::user(question));
        let reply = self.model.complete(&self.history, self.temperature)?;
        self.history.push(ChatMessage::assistant(reply.clone()));
        Ok(reply)
    }
}
