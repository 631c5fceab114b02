use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::retry::RetryPolicy;
use super::GatewayError;

pub const ENV_ENDPOINT: &str = "PERSUASION_ENDPOINT";
pub const ENV_MODEL: &str = "PERSUASION_MODEL";
pub const ENV_API_KEY: &str = "PERSUASION_API_KEY";

/// Connection and decoding settings for a networked chat endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub endpoint_url: String,
    pub model_id: String,
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
    pub timeout_ms: u64,
    pub max_retries: u32,
    pub retry_base_delay_ms: u64,
    pub retry_max_delay_ms: u64,
    /// Bearer token. Never written back out.
    #[serde(skip_serializing)]
    pub api_key: Option<String>,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            endpoint_url: "http://127.0.0.1:8000/v1".into(),
            model_id: "Llama-2-70b-chat-hf".into(),
            temperature: 0.7,
            top_p: 0.9,
            max_tokens: 512,
            timeout_ms: 120_000,
            max_retries: 3,
            retry_base_delay_ms: 500,
            retry_max_delay_ms: 30_000,
            api_key: None,
        }
    }
}

impl BackendConfig {
    pub const MAX_RETRIES_LIMIT: u32 = 8;

    pub fn validate(&self) -> Result<(), GatewayError> {
        let fail = |msg: String| Err(GatewayError::InvalidConfig(msg));
        if self.endpoint_url.trim().is_empty() {
            return fail("endpoint_url is empty".into());
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return fail(format!("temperature must be >= 0, got {}", self.temperature));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return fail(format!("top_p must be in (0, 1], got {}", self.top_p));
        }
        if self.max_tokens == 0 {
            return fail("max_tokens must be positive".into());
        }
        if self.timeout_ms == 0 {
            return fail("timeout must be positive".into());
        }
        if self.max_retries > Self::MAX_RETRIES_LIMIT {
            return fail(format!(
                "max_retries must be <= {}, got {}",
                Self::MAX_RETRIES_LIMIT,
                self.max_retries
            ));
        }
        if self.retry_max_delay_ms < self.retry_base_delay_ms {
            return fail("retry_max_delay_ms is below retry_base_delay_ms".into());
        }
        Ok(())
    }

    /// Overrides endpoint, model and credentials from the environment.
    pub fn apply_env(&mut self) {
        self.apply_env_from(|key| std::env::var(key).ok());
    }

    pub fn apply_env_from(&mut self, lookup: impl Fn(&str) -> Option<String>) {
        if let Some(url) = lookup(ENV_ENDPOINT).filter(|v| !v.is_empty()) {
            self.endpoint_url = url;
        }
        if let Some(model) = lookup(ENV_MODEL).filter(|v| !v.is_empty()) {
            self.model_id = model;
        }
        if let Some(key) = lookup(ENV_API_KEY).filter(|v| !v.is_empty()) {
            self.api_key = Some(key);
        }
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.timeout_ms)
    }

    pub fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy {
            max_retries: self.max_retries,
            base_delay: Duration::from_millis(self.retry_base_delay_ms),
            max_delay: Duration::from_millis(self.retry_max_delay_ms),
        }
    }

    pub fn chat_url(&self) -> String {
        format!("{}/chat/completions", self.endpoint_url.trim_end_matches('/'))
    }

    /// Decoding parameters as recorded in transcripts.
    pub fn metadata(&self) -> BTreeMap<String, String> {
        BTreeMap::from([
            ("backend".to_string(), "http".to_string()),
            ("endpoint".to_string(), self.endpoint_url.clone()),
            ("model".to_string(), self.model_id.clone()),
            ("temperature".to_string(), self.temperature.to_string()),
            ("top_p".to_string(), self.top_p.to_string()),
            ("max_tokens".to_string(), self.max_tokens.to_string()),
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = BackendConfig::default();
        c.validate().unwrap();
        assert_eq!(c.temperature, 0.7);
        assert_eq!(c.top_p, 0.9);
        assert_eq!(c.max_tokens, 512);
    }

    #[test]
    fn bounds_are_enforced() {
        let mut c = BackendConfig {
            max_retries: 9,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        c.max_retries = 8;
        c.validate().unwrap();
        c.timeout_ms = 0;
        assert!(c.validate().is_err());
        let c = BackendConfig {
            top_p: 0.0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn env_overrides() {
        let mut c = BackendConfig::default();
        c.apply_env_from(|k| match k {
            ENV_ENDPOINT => Some("http://example:9/".into()),
            ENV_API_KEY => Some("secret".into()),
            _ => None,
        });
        assert_eq!(c.chat_url(), "http://example:9/chat/completions");
        assert_eq!(c.api_key.as_deref(), Some("secret"));
        assert!(!toml::to_string(&c).unwrap().contains("secret"));
    }
}
