//! Scripted provider for deterministic runs.
//!
//! A script is an ordered list of entries. A request resolves to the first
//! entry whose template and predicate match and which still has a response to
//! give. Each entry keeps its own invocation counter, so a given request
//! sequence always yields the same response sequence.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::templates::TemplateId;
use super::{ModelProvider, ProviderCall, ProviderError};

pub const DEFAULT_MALFORMED: &str = "this is not the JSON you are looking for";

/// Conditions on request variables. All listed conditions must hold.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MockPredicate {
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub equals: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub contains: BTreeMap<String, String>,
}

impl MockPredicate {
    pub fn matches(&self, variables: &BTreeMap<String, String>) -> bool {
        self.equals.iter().all(|(k, v)| variables.get(k) == Some(v))
            && self
                .contains
                .iter()
                .all(|(k, v)| variables.get(k).is_some_and(|have| have.contains(v.as_str())))
    }
}

/// A canned response: either raw text or a JSON value serialized compactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MockResponse {
    Raw(String),
    Json(Value),
}

impl MockResponse {
    pub fn render(&self) -> String {
        match self {
            MockResponse::Raw(s) => s.clone(),
            MockResponse::Json(v) => v.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockEntry {
    pub template: TemplateId,
    #[serde(default)]
    pub when: MockPredicate,
    /// Number of malformed responses returned before the scripted ones.
    #[serde(default)]
    pub malformed_before: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub malformed_text: Option<String>,
    #[serde(default)]
    pub responses: Vec<MockResponse>,
    /// Keep returning the last response once the list is exhausted.
    #[serde(default = "default_true")]
    pub repeat: bool,
    /// Every matching call times out.
    #[serde(default)]
    pub timeout: bool,
}

fn default_true() -> bool {
    true
}

impl MockEntry {
    pub fn new(template: TemplateId) -> Self {
        MockEntry {
            template,
            when: MockPredicate::default(),
            malformed_before: 0,
            malformed_text: None,
            responses: Vec::new(),
            repeat: true,
            timeout: false,
        }
    }

    pub fn respond(mut self, value: Value) -> Self {
        self.responses.push(MockResponse::Json(value));
        self
    }

    pub fn respond_raw(mut self, raw: impl Into<String>) -> Self {
        self.responses.push(MockResponse::Raw(raw.into()));
        self
    }

    pub fn when_eq(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.when.equals.insert(key.into(), value.into());
        self
    }

    pub fn when_contains(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.when.contains.insert(key.into(), value.into());
        self
    }

    pub fn malformed(mut self, count: usize) -> Self {
        self.malformed_before = count;
        self
    }

    pub fn once(mut self) -> Self {
        self.repeat = false;
        self
    }

    pub fn timing_out(mut self) -> Self {
        self.timeout = true;
        self
    }

    fn capacity(&self) -> Option<usize> {
        if self.repeat && (!self.responses.is_empty() || self.timeout) {
            None
        } else if self.timeout {
            Some(self.malformed_before.max(1))
        } else {
            Some(self.malformed_before + self.responses.len())
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MockScript {
    pub entries: Vec<MockEntry>,
}

impl MockScript {
    pub fn new() -> Self {
        MockScript::default()
    }

    pub fn with(mut self, entry: MockEntry) -> Self {
        self.entries.push(entry);
        self
    }

    pub fn push(&mut self, entry: MockEntry) {
        self.entries.push(entry);
    }

    pub fn load(path: &Path) -> Result<MockScript, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}

pub struct MockProvider {
    script: MockScript,
    counters: Mutex<Vec<usize>>,
    invocations: AtomicUsize,
}

impl MockProvider {
    pub fn new(script: MockScript) -> Self {
        let counters = Mutex::new(vec![0; script.entries.len()]);
        MockProvider { script, counters, invocations: AtomicUsize::new(0) }
    }

    /// Total calls received, matched or not.
    pub fn invocations(&self) -> usize {
        self.invocations.load(Ordering::SeqCst)
    }

    pub fn script(&self) -> &MockScript {
        &self.script
    }
}

impl ModelProvider for MockProvider {
    fn tag(&self) -> String {
        "mock".to_string()
    }

    fn complete(&self, call: &ProviderCall<'_>) -> Result<String, ProviderError> {
        self.invocations.fetch_add(1, Ordering::SeqCst);
        let mut counters = self.counters.lock().expect("mock counters poisoned");
        for (idx, entry) in self.script.entries.iter().enumerate() {
            if entry.template != call.template || !entry.when.matches(call.variables) {
                continue;
            }
            let n = counters[idx];
            if entry.capacity().is_some_and(|cap| n >= cap) {
                continue;
            }
            counters[idx] += 1;
            if entry.timeout {
                return Err(ProviderError::Timeout);
            }
            if n < entry.malformed_before {
                return Ok(entry.malformed_text.clone().unwrap_or_else(|| DEFAULT_MALFORMED.to_string()));
            }
            let k = (n - entry.malformed_before).min(entry.responses.len().saturating_sub(1));
            return match entry.responses.get(k) {
                Some(r) => Ok(r.render()),
                None => Ok(entry.malformed_text.clone().unwrap_or_else(|| DEFAULT_MALFORMED.to_string())),
            };
        }
        Err(ProviderError::Unmatched(call.template))
    }
}
