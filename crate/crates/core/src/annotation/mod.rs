//! Pairwise human evaluation: pair sampling, control injection, serving,
//! judgment recording, worker gating and tally export.

mod gating;
mod render;
mod sampling;
mod server;
mod service;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dialogue::SocialDimension;

pub use gating::{
    export_tally, gate_workers, read_judgments_csv, votes_from_judgments, write_judgments_csv,
    GateOutcome, GatingPolicy, WorkerRecord, JUDGMENTS_HEADER,
};
pub use render::{render_argument_png, RenderOptions};
pub use sampling::{
    arguments_from_transcripts, inject_controls, sample_pairs, ControlArgument, ControlCorpus,
    SamplingConfig,
};
pub use server::router;
pub use service::{AnnotationService, Clock, ServiceConfig, TaskView};

pub const DEFAULT_REDUNDANCY: u32 = 10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArgumentRecord {
    pub id: String,
    pub dimension: SocialDimension,
    pub text: String,
    pub source_transcript: String,
    pub successful: bool,
}

/// Two arguments to compare. `left`/`right` are the stored order; the side
/// each appears on screen is decided per serve. In a control pair `left` is
/// a baseline argument and `right` a control argument.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairTask {
    pub id: String,
    pub left: String,
    pub right: String,
    pub dimension_pair: [SocialDimension; 2],
    pub is_control: bool,
    pub placement_seed: u64,
    pub target_redundancy: u32,
}

/// Side picked on screen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Choice {
    Left,
    Right,
}

/// Whether the stored order was shown as is or mirrored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DisplayOrder {
    Original,
    Swapped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgmentRecord {
    pub worker: String,
    pub pair: String,
    pub choice: Choice,
    pub order: DisplayOrder,
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
    pub is_control: bool,
}

impl JudgmentRecord {
    /// True when the stored `left` argument won.
    pub fn prefers_stored_left(&self) -> bool {
        matches!(
            (self.choice, self.order),
            (Choice::Left, DisplayOrder::Original) | (Choice::Right, DisplayOrder::Swapped)
        )
    }

    /// For a control pair: the worker picked the control argument.
    pub fn failed_control(&self) -> bool {
        self.is_control && !self.prefers_stored_left()
    }
}

/// Everything the service needs to run: argument texts, control texts and
/// the pairs to serve. Stored as `tasks.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSet {
    pub seed: u64,
    pub arguments: Vec<ArgumentRecord>,
    pub controls: Vec<ControlArgument>,
    pub pairs: Vec<PairTask>,
}

impl TaskSet {
    pub fn load(path: &Path) -> Result<Self, AnnotationError> {
        let text = fs::read_to_string(path)
            .map_err(|e| AnnotationError::Io(format!("{}: {e}", path.display())))?;
        let set: TaskSet = serde_json::from_str(&text)
            .map_err(|e| AnnotationError::InvalidTaskSet(format!("{}: {e}", path.display())))?;
        set.validate()?;
        Ok(set)
    }

    pub fn save(&self, path: &Path) -> Result<(), AnnotationError> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| AnnotationError::InvalidTaskSet(e.to_string()))?;
        fs::write(path, text + "\n").map_err(|e| AnnotationError::Io(format!("{}: {e}", path.display())))
    }

    pub fn pair(&self, id: &str) -> Option<&PairTask> {
        self.pairs.iter().find(|p| p.id == id)
    }

    /// Text of an argument or control id.
    pub fn text_of(&self, id: &str) -> Option<&str> {
        self.arguments
            .iter()
            .find(|a| a.id == id)
            .map(|a| a.text.as_str())
            .or_else(|| self.controls.iter().find(|c| c.id == id).map(|c| c.text.as_str()))
    }

    pub fn validate(&self) -> Result<(), AnnotationError> {
        let mut ids = std::collections::BTreeSet::new();
        for p in &self.pairs {
            if !ids.insert(p.id.as_str()) {
                return Err(AnnotationError::InvalidTaskSet(format!("duplicate pair id `{}`", p.id)));
            }
            for side in [&p.left, &p.right] {
                if self.text_of(side).is_none() {
                    return Err(AnnotationError::InvalidTaskSet(format!(
                        "pair `{}` references unknown argument `{side}`",
                        p.id
                    )));
                }
            }
            if !p.is_control && p.dimension_pair[0] == p.dimension_pair[1] {
                return Err(AnnotationError::InvalidTaskSet(format!(
                    "pair `{}` compares a dimension with itself",
                    p.id
                )));
            }
            if p.target_redundancy == 0 {
                return Err(AnnotationError::InvalidTaskSet(format!(
                    "pair `{}` has zero redundancy",
                    p.id
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnnotationError {
    #[error("not enough successful arguments for `{}` vs `{}`", .0[0], .0[1])]
    InsufficientArguments([SocialDimension; 2]),
    #[error("control corpus is empty")]
    EmptyControlCorpus,
    #[error("control fraction {0} must be in (0, 1]")]
    InvalidFraction(f64),
    #[error("unknown worker `{0}`")]
    UnknownWorker(String),
    #[error("unknown pair `{0}`")]
    UnknownPair(String),
    #[error("worker `{worker}` already judged pair `{pair}`")]
    DuplicateJudgment { worker: String, pair: String },
    #[error("pair `{pair}` was not served to worker `{worker}`")]
    UnservedPair { worker: String, pair: String },
    #[error("pair `{0}` already has its full number of judgments")]
    RedundancyReached(String),
    #[error("invalid task set: {0}")]
    InvalidTaskSet(String),
    #[error("{0}")]
    Io(String),
}
