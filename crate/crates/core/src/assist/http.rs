// SPDX-License-Identifier: Apache-2.0

use std::time::Duration;

use serde_json::{json, Value};
use ureq::Agent;

use super::{AssistConfig, AssistError, ChatTransport, TransportError};

/// Chat-completion transport: POSTs `{model, messages}` with bearer auth and
/// reads `choices[0].message.content` from the reply.
pub struct HttpTransport {
    agent: Agent,
    endpoint: String,
    model: String,
    token: String,
}

impl std::fmt::Debug for HttpTransport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpTransport")
            .field("endpoint", &self.endpoint)
            .field("model", &self.model)
            .finish_non_exhaustive()
    }
}

impl HttpTransport {
    /// Reads the bearer token from the configured environment variable.
    pub fn from_config(config: &AssistConfig) -> Result<Self, AssistError> {
        let token = std::env::var(&config.auth_token_env_var)
            .ok()
            .filter(|t| !t.trim().is_empty())
            .ok_or_else(|| AssistError::AuthMissing(config.auth_token_env_var.clone()))?;
        Ok(Self::with_token(config, token))
    }

    pub fn with_token(config: &AssistConfig, token: impl Into<String>) -> Self {
        let agent: Agent = Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.timeout_seconds)))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            agent,
            endpoint: config.endpoint_url.clone(),
            model: config.model_name.clone(),
            token: token.into(),
        }
    }
}

fn extract_content(body: &str) -> Option<String> {
    let v: Value = serde_json::from_str(body).ok()?;
    let choice = v.get("choices")?.get(0)?;
    choice
        .pointer("/message/content")
        .or_else(|| choice.get("text"))
        .and_then(Value::as_str)
        .map(str::to_owned)
}

impl ChatTransport for HttpTransport {
    fn complete(&self, prompt: &str) -> Result<String, TransportError> {
        let request = json!({
            "model": self.model,
            "messages": [{ "role": "user", "content": prompt }],
        });
        let mut response = self
            .agent
            .post(&self.endpoint)
            .header("Authorization", &format!("Bearer {}", self.token))
            .send_json(&request)
            .map_err(|e| TransportError::Retryable(e.to_string()))?;
        let status = response.status().as_u16();
        let body = response
            .body_mut()
            .read_to_string()
            .map_err(|e| TransportError::Retryable(e.to_string()))?;
        match status {
            200..=299 => extract_content(&body).ok_or(TransportError::Malformed(body)),
            429 | 500..=599 => Err(TransportError::Retryable(format!("HTTP {status}"))),
            _ => Err(TransportError::Fatal(format!("HTTP {status}: {}", body.trim()))),
        }
    }
}
