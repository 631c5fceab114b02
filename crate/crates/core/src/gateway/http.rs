use std::collections::BTreeMap;
use std::time::Instant;

use serde_json::{json, Value};

use super::config::BackendConfig;
use super::{ChatBackend, CompletionRequest, CompletionResponse, GatewayError};

/// Blocking client for `POST {endpoint_url}/chat/completions`.
///
/// The request body carries both the rendered prompt and the role-tagged
/// messages, plus the seed and decoding parameters. The reply text is read
/// from `text`, `choices[0].message.content` or `choices[0].text`.
#[derive(Debug, Clone)]
pub struct HttpBackend {
    config: BackendConfig,
    client: reqwest::blocking::Client,
}

impl HttpBackend {
    pub fn new(config: BackendConfig) -> Result<Self, GatewayError> {
        config.validate()?;
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout())
            .build()
            .map_err(|e| GatewayError::InvalidConfig(e.to_string()))?;
        Ok(HttpBackend { config, client })
    }

    pub fn config(&self) -> &BackendConfig {
        &self.config
    }

    fn body(&self, request: &CompletionRequest) -> Value {
        json!({
            "model": self.config.model_id,
            "prompt": request.prompt,
            "messages": request.messages,
            "seed": request.seed,
            "temperature": self.config.temperature,
            "top_p": self.config.top_p,
            "max_tokens": self.config.max_tokens,
        })
    }

    fn attempt(&self, url: &str, body: &Value) -> Result<CompletionResponse, GatewayError> {
        let started = Instant::now();
        let mut builder = self.client.post(url).json(body);
        if let Some(key) = &self.config.api_key {
            builder = builder.bearer_auth(key);
        }
        let response = builder.send().map_err(map_transport)?;
        let status = response.status();
        let text = response.text().map_err(map_transport)?;
        if !status.is_success() {
            return Err(GatewayError::RemoteError {
                status: status.as_u16(),
                body: truncate(&text, 512),
            });
        }
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| GatewayError::InvalidResponse(format!("not JSON: {e}")))?;
        let mut parsed = parse_completion(&value)?;
        parsed.latency = started.elapsed();
        Ok(parsed)
    }
}

fn map_transport(err: reqwest::Error) -> GatewayError {
    if err.is_timeout() {
        GatewayError::Timeout
    } else {
        GatewayError::Transport(err.to_string())
    }
}

fn truncate(text: &str, max: usize) -> String {
    match text.char_indices().nth(max) {
        Some((idx, _)) => format!("{}...", &text[..idx]),
        None => text.to_string(),
    }
}

/// Extracts reply text and token usage from a completion body.
pub(crate) fn parse_completion(value: &Value) -> Result<CompletionResponse, GatewayError> {
    let text = value
        .get("text")
        .and_then(Value::as_str)
        .or_else(|| value.pointer("/choices/0/message/content").and_then(Value::as_str))
        .or_else(|| value.pointer("/choices/0/text").and_then(Value::as_str))
        .ok_or_else(|| GatewayError::InvalidResponse("no completion text".into()))?;
    if text.trim().is_empty() {
        return Err(GatewayError::InvalidResponse("empty completion text".into()));
    }
    let usage = |key: &str| value.pointer(&format!("/usage/{key}")).and_then(Value::as_u64);
    Ok(CompletionResponse {
        text: text.to_string(),
        prompt_tokens: usage("prompt_tokens"),
        completion_tokens: usage("completion_tokens"),
        latency: Default::default(),
    })
}

impl ChatBackend for HttpBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, GatewayError> {
        let url = self.config.chat_url();
        let body = self.body(request);
        self.config
            .retry_policy()
            .run(std::thread::sleep, |_| self.attempt(&url, &body))
    }

    fn metadata(&self) -> BTreeMap<String, String> {
        self.config.metadata()
    }
}
