use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{SocialDimension, StubbornnessLevel};

const DEFAULT_CATALOG: &str = include_str!("../../data/prompt_catalog.toml");

#[derive(Debug, thiserror::Error)]
pub enum CatalogError {
    #[error("reading prompt catalog: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing prompt catalog: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("prompt catalog has no strategy text for `{0}`")]
    MissingStrategy(SocialDimension),
    #[error("prompt catalog must not define a strategy for the baseline")]
    BaselineStrategy,
    #[error("prompt catalog has no persona for `{0}`")]
    MissingPersona(StubbornnessLevel),
    #[error("prompt catalog field `{0}` is empty")]
    EmptyField(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct ConvincerSection {
    base: String,
    strategies: BTreeMap<SocialDimension, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct SkepticSection {
    personas: BTreeMap<StubbornnessLevel, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct StageSection {
    opening: String,
    closing_question: String,
}

/// Versioned collection of every fixed text the agents see.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptCatalog {
    version: String,
    topic: String,
    convincer: ConvincerSection,
    skeptic: SkepticSection,
    stages: StageSection,
}

impl Default for PromptCatalog {
    fn default() -> Self {
        PromptCatalog::from_toml(DEFAULT_CATALOG).expect("bundled prompt catalog is valid")
    }
}

impl PromptCatalog {
    pub fn from_toml(text: &str) -> Result<Self, CatalogError> {
        let catalog: PromptCatalog = toml::from_str(text)?;
        catalog.validate()?;
        Ok(catalog)
    }

    pub fn load(path: &Path) -> Result<Self, CatalogError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    fn validate(&self) -> Result<(), CatalogError> {
        let non_empty = [
            ("version", &self.version),
            ("topic", &self.topic),
            ("convincer.base", &self.convincer.base),
            ("stages.opening", &self.stages.opening),
            ("stages.closing_question", &self.stages.closing_question),
        ];
        for (name, value) in non_empty {
            if value.trim().is_empty() {
                return Err(CatalogError::EmptyField(name));
            }
        }
        if self
            .convincer
            .strategies
            .contains_key(&SocialDimension::Baseline)
        {
            return Err(CatalogError::BaselineStrategy);
        }
        for dim in SocialDimension::ALL.into_iter().filter(|d| !d.is_baseline()) {
            match self.convincer.strategies.get(&dim) {
                Some(text) if !text.trim().is_empty() => {}
                _ => return Err(CatalogError::MissingStrategy(dim)),
            }
        }
        for level in StubbornnessLevel::ALL {
            match self.skeptic.personas.get(&level) {
                Some(text) if !text.trim().is_empty() => {}
                _ => return Err(CatalogError::MissingPersona(level)),
            }
        }
        Ok(())
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn topic(&self) -> &str {
        &self.topic
    }

    /// Strategy fragment for `dimension`; empty for the baseline.
    pub fn strategy_text(&self, dimension: SocialDimension) -> &str {
        self.convincer
            .strategies
            .get(&dimension)
            .map(String::as_str)
            .unwrap_or("")
    }

    /// The Convincer's system prompt: the base text, followed by a single
    /// space and the strategy fragment for non-baseline dimensions.
    pub fn convincer_system_prompt(&self, dimension: SocialDimension) -> String {
        let strategy = self.strategy_text(dimension);
        if strategy.is_empty() {
            self.convincer.base.clone()
        } else {
            format!("{} {}", self.convincer.base, strategy)
        }
    }

    pub fn skeptic_system_prompt(&self, level: StubbornnessLevel) -> String {
        self.skeptic.personas[&level].clone()
    }

    /// Stage-1 text spoken by the Skeptic.
    pub fn opening(&self) -> &str {
        &self.stages.opening
    }

    /// Stage-4 text spoken by the Convincer.
    pub fn closing_question(&self) -> &str {
        &self.stages.closing_question
    }
}
