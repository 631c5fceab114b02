//! The five-stage Convincer/Skeptic persuasion dialogue.
//!
//! A dialogue runs as follows: the Skeptic opens with a fixed doubt, the
//! Convincer argues, the Skeptic responds, the Convincer asks a fixed closing
//! question, and the Skeptic signals whether its opinion changed. Stages 1
//! and 4 come from the [`PromptCatalog`]; stages 2, 3 and 5 are generated.

mod catalog;
mod chat_template;
mod protocol;
mod signal;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use catalog::{CatalogError, PromptCatalog};
pub use chat_template::{parse_chat_prompt, render_chat_prompt, Direction, TemplateError};
pub use protocol::{run_dialogue, DialogueError, DialogueSpec};
pub use signal::{parse_opinion_signal, OpinionSignal, SignalError};

/// Persuasion strategy given to the Convincer: one of nine dimensions of
/// social pragmatics, or the unprompted baseline.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum SocialDimension {
    Knowledge,
    Power,
    Status,
    Trust,
    Support,
    Similarity,
    Identity,
    Fun,
    Conflict,
    Baseline,
}

impl SocialDimension {
    pub const ALL: [SocialDimension; 10] = [
        SocialDimension::Knowledge,
        SocialDimension::Power,
        SocialDimension::Status,
        SocialDimension::Trust,
        SocialDimension::Support,
        SocialDimension::Similarity,
        SocialDimension::Identity,
        SocialDimension::Fun,
        SocialDimension::Conflict,
        SocialDimension::Baseline,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SocialDimension::Knowledge => "knowledge",
            SocialDimension::Power => "power",
            SocialDimension::Status => "status",
            SocialDimension::Trust => "trust",
            SocialDimension::Support => "support",
            SocialDimension::Similarity => "similarity",
            SocialDimension::Identity => "identity",
            SocialDimension::Fun => "fun",
            SocialDimension::Conflict => "conflict",
            SocialDimension::Baseline => "baseline",
        }
    }

    pub fn is_baseline(self) -> bool {
        self == SocialDimension::Baseline
    }
}

impl fmt::Display for SocialDimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Error for unrecognised enumeration ids.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown {kind} `{value}`")]
pub struct UnknownId {
    pub kind: &'static str,
    pub value: String,
}

impl FromStr for SocialDimension {
    type Err = UnknownId;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let needle = s.trim().to_ascii_lowercase();
        SocialDimension::ALL
            .into_iter()
            .find(|d| d.as_str() == needle)
            .ok_or_else(|| UnknownId {
                kind: "dimension",
                value: s.to_string(),
            })
    }
}

/// How resistant the Skeptic persona is to changing its mind.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum StubbornnessLevel {
    Soft,
    Moderate,
    Hard,
}

impl StubbornnessLevel {
    pub const ALL: [StubbornnessLevel; 3] = [
        StubbornnessLevel::Soft,
        StubbornnessLevel::Moderate,
        StubbornnessLevel::Hard,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StubbornnessLevel::Soft => "soft",
            StubbornnessLevel::Moderate => "moderate",
            StubbornnessLevel::Hard => "hard",
        }
    }
}

impl fmt::Display for StubbornnessLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StubbornnessLevel {
    type Err = UnknownId;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let needle = s.trim().to_ascii_lowercase();
        StubbornnessLevel::ALL
            .into_iter()
            .find(|l| l.as_str() == needle)
            .ok_or_else(|| UnknownId {
                kind: "stubbornness level",
                value: s.to_string(),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    Convincer,
    Skeptic,
}

/// One utterance in a dialogue. Stages run 1 through 5.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub speaker: Speaker,
    pub stage: u8,
    pub text: String,
}

/// Final stance of the Skeptic as recorded in a transcript.
///
/// `valid` is false when the stage-5 reply did not begin with a Yes/No token;
/// such transcripts are kept on disk but excluded from estimates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outcome {
    pub changed: bool,
    pub reasoning: String,
    pub valid: bool,
}

impl Outcome {
    pub fn from_signal(signal: &OpinionSignal) -> Self {
        Outcome {
            changed: signal.changed,
            reasoning: signal.reasoning.clone(),
            valid: true,
        }
    }

    pub fn invalid(raw: &str) -> Self {
        Outcome {
            changed: false,
            reasoning: raw.to_string(),
            valid: false,
        }
    }

    /// True when the dialogue counts as a successful persuasion.
    pub fn is_success(&self) -> bool {
        self.valid && self.changed
    }
}

/// Complete record of one dialogue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogueTranscript {
    pub id: String,
    pub dimension: SocialDimension,
    pub stubbornness: StubbornnessLevel,
    pub seed: u64,
    pub messages: Vec<Message>,
    pub outcome: Outcome,
    pub backend_meta: BTreeMap<String, String>,
}

impl DialogueTranscript {
    /// The Convincer's stage-2 argument.
    pub fn argument(&self) -> Option<&str> {
        self.messages
            .iter()
            .find(|m| m.stage == 2)
            .map(|m| m.text.as_str())
    }

    /// Checks the stage/speaker layout of the five messages.
    pub fn is_well_formed(&self) -> bool {
        const LAYOUT: [Speaker; 5] = [
            Speaker::Skeptic,
            Speaker::Convincer,
            Speaker::Skeptic,
            Speaker::Convincer,
            Speaker::Skeptic,
        ];
        self.messages.len() == LAYOUT.len()
            && self
                .messages
                .iter()
                .zip(LAYOUT)
                .enumerate()
                .all(|(i, (m, speaker))| {
                    m.stage as usize == i + 1 && m.speaker == speaker && !m.text.is_empty()
                })
    }
}

/// Whitespace-delimited word count.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}
