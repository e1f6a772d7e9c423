use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{TaskClass, DEFAULT_TEMPERATURE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    /// Any endpoint speaking the OpenAI chat-completions protocol.
    Openai,
    Anthropic,
    Mock,
}

impl fmt::Display for ProviderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProviderKind::Openai => "openai",
            ProviderKind::Anthropic => "anthropic",
            ProviderKind::Mock => "mock",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderBinding {
    pub kind: ProviderKind,
    pub model: String,
    /// Base URL; the provider's public endpoint when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    /// Name of the environment variable holding the API key.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
    #[serde(default = "default_temperature")]
    pub temperature: f32,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    /// Minimum spacing between calls to the same provider.
    #[serde(default)]
    pub min_interval_ms: u64,
}

fn default_temperature() -> f32 {
    DEFAULT_TEMPERATURE
}

fn default_timeout() -> u64 {
    120
}

impl ProviderBinding {
    pub fn new(kind: ProviderKind, model: impl Into<String>) -> Self {
        ProviderBinding {
            kind,
            model: model.into(),
            endpoint: None,
            api_key_env: None,
            temperature: DEFAULT_TEMPERATURE,
            timeout_secs: default_timeout(),
            min_interval_ms: 0,
        }
    }

    /// Identity of the underlying provider; bindings sharing a key share a
    /// client and a rate limiter.
    pub fn key(&self) -> String {
        format!("{}@{}", self.kind, self.endpoint.as_deref().unwrap_or("default"))
    }
}

/// Task class → provider binding. Pure configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingConfig {
    pub bindings: BTreeMap<TaskClass, ProviderBinding>,
}

impl Default for RoutingConfig {
    fn default() -> Self {
        let mut bindings = BTreeMap::new();
        let mut fast = ProviderBinding::new(ProviderKind::Openai, "gpt-4o");
        fast.api_key_env = Some("OPENAI_API_KEY".into());
        let mut reasoning = ProviderBinding::new(ProviderKind::Openai, "o3");
        reasoning.api_key_env = Some("OPENAI_API_KEY".into());
        let mut long = ProviderBinding::new(ProviderKind::Anthropic, "claude-sonnet-4-20250514");
        long.api_key_env = Some("ANTHROPIC_API_KEY".into());
        bindings.insert(TaskClass::Structured, fast);
        bindings.insert(TaskClass::Reasoning, reasoning);
        bindings.insert(TaskClass::LongContext, long);
        RoutingConfig { bindings }
    }
}

impl RoutingConfig {
    pub fn mock() -> Self {
        let bindings = [TaskClass::Structured, TaskClass::Reasoning, TaskClass::LongContext]
            .into_iter()
            .map(|c| (c, ProviderBinding::new(ProviderKind::Mock, format!("mock-{c}"))))
            .collect();
        RoutingConfig { bindings }
    }
}
