use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ChatBackend, CompletionRequest, CompletionResponse, GatewayError};
use crate::dialogue::{parse_opinion_signal, SocialDimension, StubbornnessLevel};
use crate::seed::derive_seed;

const DEFAULT_CORPUS: &str = include_str!("../../data/mock_corpus.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockReplies {
    pub pushback: Vec<String>,
    pub convinced: Vec<String>,
    pub unconvinced: Vec<String>,
}

/// Canned texts the mock draws from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockCorpus {
    pub version: String,
    pub default_probability: BTreeMap<StubbornnessLevel, f64>,
    pub arguments: BTreeMap<SocialDimension, Vec<String>>,
    pub replies: MockReplies,
}

impl Default for MockCorpus {
    fn default() -> Self {
        MockCorpus::from_toml(DEFAULT_CORPUS).expect("bundled mock corpus is valid")
    }
}

impl MockCorpus {
    pub fn from_toml(text: &str) -> Result<Self, GatewayError> {
        let corpus: MockCorpus = toml::from_str(text)
            .map_err(|e| GatewayError::InvalidConfig(format!("mock corpus: {e}")))?;
        corpus.validate()?;
        Ok(corpus)
    }

    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GatewayError::InvalidConfig(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    fn validate(&self) -> Result<(), GatewayError> {
        let bad = |m: String| Err(GatewayError::InvalidConfig(m));
        for dim in SocialDimension::ALL {
            if self.arguments.get(&dim).map_or(true, |a| a.is_empty()) {
                return bad(format!("mock corpus has no argument for `{dim}`"));
            }
        }
        if self.replies.pushback.is_empty() {
            return bad("mock corpus has no pushback replies".into());
        }
        for text in &self.replies.convinced {
            if !parse_opinion_signal(text).is_ok_and(|s| s.changed) {
                return bad(format!("convinced reply does not open with Yes: {text:?}"));
            }
        }
        for text in &self.replies.unconvinced {
            if !parse_opinion_signal(text).is_ok_and(|s| !s.changed) {
                return bad(format!("unconvinced reply does not open with No: {text:?}"));
            }
        }
        if self.replies.convinced.is_empty() || self.replies.unconvinced.is_empty() {
            return bad("mock corpus needs both convinced and unconvinced replies".into());
        }
        for (level, p) in &self.default_probability {
            check_probability(*p, &format!("default probability for {level}"))?;
        }
        Ok(())
    }
}

fn check_probability(p: f64, what: &str) -> Result<(), GatewayError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(GatewayError::InvalidConfig(format!("{what} must be in [0, 1], got {p}")))
    }
}

/// Configuration of the offline backend: per-cell persuasion probabilities
/// plus the corpus it answers from.
#[derive(Debug, Clone, PartialEq)]
pub struct MockBehavior {
    persuasion_prob: BTreeMap<(SocialDimension, StubbornnessLevel), f64>,
    corpus: MockCorpus,
}

impl MockBehavior {
    /// A behavior with no cells configured.
    pub fn new(corpus: MockCorpus) -> Self {
        MockBehavior {
            persuasion_prob: BTreeMap::new(),
            corpus,
        }
    }

    /// Fills every cell from the corpus's per-level default probabilities.
    pub fn with_defaults(corpus: MockCorpus) -> Self {
        let mut behavior = MockBehavior::new(corpus);
        for dim in SocialDimension::ALL {
            for level in StubbornnessLevel::ALL {
                if let Some(&p) = behavior.corpus.default_probability.get(&level) {
                    behavior.persuasion_prob.insert((dim, level), p);
                }
            }
        }
        behavior
    }

    pub fn set_probability(
        &mut self,
        dimension: SocialDimension,
        stubbornness: StubbornnessLevel,
        p: f64,
    ) -> Result<(), GatewayError> {
        check_probability(p, &format!("persuasion probability for ({dimension}, {stubbornness})"))?;
        self.persuasion_prob.insert((dimension, stubbornness), p);
        Ok(())
    }

    pub fn with_probability(
        mut self,
        dimension: SocialDimension,
        stubbornness: StubbornnessLevel,
        p: f64,
    ) -> Result<Self, GatewayError> {
        self.set_probability(dimension, stubbornness, p)?;
        Ok(self)
    }

    pub fn probability(
        &self,
        dimension: SocialDimension,
        stubbornness: StubbornnessLevel,
    ) -> Option<f64> {
        self.persuasion_prob.get(&(dimension, stubbornness)).copied()
    }

    pub fn corpus(&self) -> &MockCorpus {
        &self.corpus
    }
}

fn stage_rng(seed: u64, label: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, &["mock", label], 0))
}

fn pick<'a>(rng: &mut ChaCha8Rng, options: &'a [String]) -> &'a str {
    &options[rng.random_range(0..options.len())]
}

/// Answers one request from `behavior`. A pure function of its inputs.
///
/// Stage 2 draws a canned argument, stage 3 a canned pushback, and stage 5
/// opens with "Yes" with the cell's persuasion probability. Each stage uses
/// its own ChaCha stream keyed by the dialogue seed.
pub fn mock_complete(
    behavior: &MockBehavior,
    request: &CompletionRequest,
) -> Result<CompletionResponse, GatewayError> {
    let ctx = request
        .context
        .ok_or_else(|| GatewayError::UnsupportedRequest("request has no dialogue context".into()))?;
    let p = behavior
        .probability(ctx.dimension, ctx.stubbornness)
        .ok_or(GatewayError::UnknownCell {
            dimension: ctx.dimension,
            stubbornness: ctx.stubbornness,
        })?;
    let corpus = &behavior.corpus;
    let text = match ctx.stage {
        2 => {
            let mut rng = stage_rng(request.seed, "argument");
            pick(&mut rng, &corpus.arguments[&ctx.dimension])
        }
        3 => {
            let mut rng = stage_rng(request.seed, "pushback");
            pick(&mut rng, &corpus.replies.pushback)
        }
        5 => {
            let mut rng = stage_rng(request.seed, "verdict");
            let draw: f64 = rng.random();
            if draw < p {
                pick(&mut rng, &corpus.replies.convinced)
            } else {
                pick(&mut rng, &corpus.replies.unconvinced)
            }
        }
        other => {
            return Err(GatewayError::UnsupportedRequest(format!(
                "stage {other} is scripted, not generated"
            )))
        }
    };
    Ok(CompletionResponse::text_only(text, Duration::ZERO))
}

/// [`ChatBackend`] wrapper around [`mock_complete`].
#[derive(Debug, Clone)]
pub struct MockBackend {
    behavior: MockBehavior,
}

impl MockBackend {
    pub fn new(behavior: MockBehavior) -> Self {
        MockBackend { behavior }
    }

    pub fn behavior(&self) -> &MockBehavior {
        &self.behavior
    }
}

impl ChatBackend for MockBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, GatewayError> {
        mock_complete(&self.behavior, request)
    }

    fn metadata(&self) -> BTreeMap<String, String> {
        BTreeMap::from([
            ("backend".to_string(), "mock".to_string()),
            ("model".to_string(), "mock".to_string()),
            ("mock_corpus_version".to_string(), self.behavior.corpus.version.clone()),
            ("seed_honored".to_string(), "true".to_string()),
        ])
    }
}
