//! Persuasion-dialogue simulation between LLM agents, a self-hosted pairwise
//! annotation service, and the statistics used to analyse both.
//!
//! The crate is organised by subsystem:
//!
//! - [`dialogue`]: personas, strategy prompts, the chat wire format and the
//!   five-stage Convincer/Skeptic protocol.
//! - [`gateway`]: chat-completion backends (HTTP with retries, offline mock).
//! - [`experiment`]: the dimension × stubbornness grid, transcript
//!   persistence and persuasion-probability estimates.
//! - [`stats`]: Bradley-Terry ranking, agreement, hypothesis tests and the
//!   score/embedding analyses.
//! - [`annotation`]: pair sampling, control injection, serving, gating and
//!   tally export for human judgments.

pub mod annotation;
pub mod dialogue;
pub mod experiment;
pub mod gateway;
pub mod seed;
pub mod stats;

pub use dialogue::{
    DialogueTranscript, Message, OpinionSignal, Outcome, PromptCatalog, SocialDimension, Speaker,
    StubbornnessLevel,
};
pub use gateway::{ChatBackend, CompletionRequest, CompletionResponse, GatewayError};
pub use stats::{BradleyTerryFit, PairwiseTally};
