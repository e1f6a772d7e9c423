//! Live providers over HTTP.

use std::sync::{Arc, OnceLock};
use std::time::Duration;

use reqwest::blocking::Client;
use serde_json::{json, Value};

use super::config::{ProviderBinding, ProviderKind};
use super::{ModelProvider, ProviderCall, ProviderError};

const OPENAI_BASE: &str = "https://api.openai.com/v1";
const ANTHROPIC_BASE: &str = "https://api.anthropic.com/v1";
const ANTHROPIC_VERSION: &str = "2023-06-01";

pub(crate) fn provider_for(binding: &ProviderBinding) -> Arc<dyn ModelProvider> {
    match binding.kind {
        ProviderKind::Anthropic => Arc::new(AnthropicProvider::new(binding)),
        _ => Arc::new(OpenAiProvider::new(binding)),
    }
}

struct HttpSettings {
    base: String,
    api_key_env: Option<String>,
    timeout: Duration,
    // Built on first use so construction never happens inside an async runtime.
    client: OnceLock<Result<Client, String>>,
}

impl HttpSettings {
    fn new(binding: &ProviderBinding, default_base: &str) -> Self {
        HttpSettings {
            base: binding.endpoint.clone().unwrap_or_else(|| default_base.to_string()),
            api_key_env: binding.api_key_env.clone(),
            timeout: Duration::from_secs(binding.timeout_secs),
            client: OnceLock::new(),
        }
    }

    fn client(&self) -> Result<&Client, ProviderError> {
        self.client
            .get_or_init(|| Client::builder().timeout(self.timeout).build().map_err(|e| e.to_string()))
            .as_ref()
            .map_err(|e| ProviderError::Transport(e.clone()))
    }

    fn api_key(&self) -> Option<String> {
        self.api_key_env.as_deref().and_then(|name| std::env::var(name).ok())
    }

    fn post(&self, path: &str, body: &Value, headers: &[(&str, String)]) -> Result<Value, ProviderError> {
        let url = format!("{}/{}", self.base.trim_end_matches('/'), path);
        let mut req = self.client()?.post(&url).json(body);
        for (k, v) in headers {
            req = req.header(*k, v);
        }
        let resp = req.send().map_err(|e| {
            if e.is_timeout() {
                ProviderError::Timeout
            } else {
                ProviderError::Transport(e.to_string())
            }
        })?;
        let status = resp.status();
        let text = resp.text().map_err(|e| ProviderError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(ProviderError::Transport(format!("{url} returned {status}: {text}")));
        }
        serde_json::from_str(&text).map_err(|e| ProviderError::Transport(format!("{url}: {e}")))
    }
}

pub struct OpenAiProvider {
    http: HttpSettings,
}

impl OpenAiProvider {
    pub fn new(binding: &ProviderBinding) -> Self {
        OpenAiProvider { http: HttpSettings::new(binding, OPENAI_BASE) }
    }
}

pub(crate) fn openai_body(call: &ProviderCall<'_>) -> Value {
    json!({
        "model": call.model,
        "temperature": call.temperature,
        "response_format": {"type": "json_object"},
        "messages": [{"role": "user", "content": call.prompt}],
    })
}

pub(crate) fn openai_content(resp: &Value) -> Option<String> {
    resp.pointer("/choices/0/message/content").and_then(Value::as_str).map(str::to_string)
}

impl ModelProvider for OpenAiProvider {
    fn tag(&self) -> String {
        format!("openai@{}", self.http.base)
    }

    fn complete(&self, call: &ProviderCall<'_>) -> Result<String, ProviderError> {
        let headers: Vec<(&str, String)> =
            self.http.api_key().map(|k| vec![("authorization", format!("Bearer {k}"))]).unwrap_or_default();
        let resp = self.http.post("chat/completions", &openai_body(call), &headers)?;
        openai_content(&resp).ok_or_else(|| ProviderError::Transport("response has no message content".into()))
    }
}

pub struct AnthropicProvider {
    http: HttpSettings,
}

impl AnthropicProvider {
    pub fn new(binding: &ProviderBinding) -> Self {
        AnthropicProvider { http: HttpSettings::new(binding, ANTHROPIC_BASE) }
    }
}

pub(crate) fn anthropic_body(call: &ProviderCall<'_>) -> Value {
    json!({
        "model": call.model,
        "max_tokens": 8192,
        "temperature": call.temperature,
        "messages": [{"role": "user", "content": call.prompt}],
    })
}

pub(crate) fn anthropic_content(resp: &Value) -> Option<String> {
    let blocks = resp.get("content")?.as_array()?;
    let text: String = blocks
        .iter()
        .filter(|b| b.get("type").and_then(Value::as_str) == Some("text"))
        .filter_map(|b| b.get("text").and_then(Value::as_str))
        .collect();
    (!text.is_empty()).then_some(text)
}

impl ModelProvider for AnthropicProvider {
    fn tag(&self) -> String {
        format!("anthropic@{}", self.http.base)
    }

    fn complete(&self, call: &ProviderCall<'_>) -> Result<String, ProviderError> {
        let mut headers = vec![("anthropic-version", ANTHROPIC_VERSION.to_string())];
        if let Some(k) = self.http.api_key() {
            headers.push(("x-api-key", k));
        }
        let resp = self.http.post("messages", &anthropic_body(call), &headers)?;
        anthropic_content(&resp).ok_or_else(|| ProviderError::Transport("response has no text content".into()))
    }
}
