use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};

fn one() -> f64 {
    1.0
}
fn timeout_default() -> u64 {
    60
}
fn retries_default() -> u32 {
    3
}
fn backoff_default() -> u64 {
    500
}
fn parallelism_default() -> usize {
    4
}
fn pointer_default() -> String {
    "/choices/0/message/content".into()
}

/// A chat-completions style endpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub model: String,
    #[serde(default = "one")]
    pub temperature: f64,
    #[serde(default = "one")]
    pub top_p: f64,
    #[serde(default)]
    pub frequency_penalty: f64,
    #[serde(default)]
    pub presence_penalty: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
    /// Environment variable holding the bearer token; no auth header when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auth_env: Option<String>,
    #[serde(default = "timeout_default")]
    pub timeout_secs: u64,
    #[serde(default = "retries_default")]
    pub max_retries: u32,
    #[serde(default = "backoff_default")]
    pub retry_backoff_ms: u64,
    #[serde(default = "parallelism_default")]
    pub parallelism: usize,
    /// JSON pointer to the completion text in the response body.
    #[serde(default = "pointer_default")]
    pub response_pointer: String,
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        RemoteConfig {
            endpoint: endpoint.into(),
            model: model.into(),
            temperature: 1.0,
            top_p: 1.0,
            frequency_penalty: 0.0,
            presence_penalty: 0.0,
            max_tokens: None,
            auth_env: None,
            timeout_secs: timeout_default(),
            max_retries: retries_default(),
            retry_backoff_ms: backoff_default(),
            parallelism: parallelism_default(),
            response_pointer: pointer_default(),
        }
    }

    /// Resolves the token from the environment.
    pub fn token(&self) -> Result<Option<String>> {
        match &self.auth_env {
            None => Ok(None),
            Some(var) => match std::env::var(var) {
                Ok(t) if !t.trim().is_empty() => Ok(Some(t)),
                _ => Err(Error::Config(format!("auth token variable {var} is not set"))),
            },
        }
    }

    pub fn request_body(&self, system: &str, user: &str) -> serde_json::Value {
        let mut body = json!({
            "model": self.model,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
            "temperature": self.temperature,
            "top_p": self.top_p,
            "frequency_penalty": self.frequency_penalty,
            "presence_penalty": self.presence_penalty,
            "n": 1,
            "stream": false,
        });
        if let Some(m) = self.max_tokens {
            body["max_tokens"] = json!(m);
        }
        body
    }
}

/// One completion per call.
pub trait ChatClient: Sync {
    fn complete(&self, system: &str, user: &str) -> std::result::Result<String, String>;
}

pub struct HttpChatClient {
    config: RemoteConfig,
    token: Option<String>,
    agent: ureq::Agent,
}

impl HttpChatClient {
    pub fn new(config: RemoteConfig) -> Result<Self> {
        let token = config.token()?;
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(HttpChatClient { config, token, agent })
    }
}

impl ChatClient for HttpChatClient {
    fn complete(&self, system: &str, user: &str) -> std::result::Result<String, String> {
        let mut req = self.agent.post(&self.config.endpoint);
        if let Some(t) = &self.token {
            req = req.header("Authorization", &format!("Bearer {t}"));
        }
        let mut resp = req.send_json(self.config.request_body(system, user)).map_err(|e| e.to_string())?;
        let status = resp.status();
        let body: serde_json::Value = resp.body_mut().read_json().map_err(|e| format!("HTTP {status}: {e}"))?;
        if !status.is_success() {
            return Err(format!("HTTP {status}: {body}"));
        }
        body.pointer(&self.config.response_pointer)
            .and_then(|v| v.as_str())
            .map(str::to_string)
            .ok_or_else(|| format!("no text at {} in response", self.config.response_pointer))
    }
}

/// Calls `client` with retries; the final error is returned as text.
pub fn complete_with_retries(
    client: &dyn ChatClient,
    system: &str,
    user: &str,
    max_retries: u32,
    backoff_ms: u64,
) -> std::result::Result<String, String> {
    let mut last = String::new();
    for attempt in 0..=max_retries {
        if attempt > 0 {
            std::thread::sleep(Duration::from_millis(backoff_ms.saturating_mul(1 << (attempt - 1).min(6))));
        }
        match client.complete(system, user) {
            Ok(text) => return Ok(text),
            Err(e) => last = e,
        }
    }
    Err(format!("failed after {} attempts: {last}", max_retries + 1))
}
