//! Every model call goes through [`Gateway`].
//!
//! The gateway routes a task to a provider binding by task class, renders the
//! prompt, validates the response against the template's schema, retries with
//! the validation error appended, and records every provider call in an
//! append-only audit log.

pub mod config;
pub mod http;
pub mod mock;
pub mod schema;
pub mod templates;

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub use config::{ProviderBinding, ProviderKind, RoutingConfig};
pub use mock::{MockEntry, MockProvider, MockScript};
pub use templates::TemplateId;

pub const MAX_ATTEMPTS: u32 = 3;
pub const DEFAULT_TEMPERATURE: f32 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskClass {
    Structured,
    Reasoning,
    LongContext,
}

impl TaskClass {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskClass::Structured => "structured",
            TaskClass::Reasoning => "reasoning",
            TaskClass::LongContext => "long_context",
        }
    }
}

impl fmt::Display for TaskClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRequest {
    pub task_class: TaskClass,
    pub template: TemplateId,
    pub variables: BTreeMap<String, String>,
    /// Overrides the binding's temperature when set. Ignored by the mock.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f32>,
}

impl TaskRequest {
    /// A request on the template's default task class.
    pub fn new(template: TemplateId) -> Self {
        TaskRequest {
            task_class: template.default_class(),
            template,
            variables: BTreeMap::new(),
            temperature: None,
        }
    }

    pub fn var(mut self, name: &str, value: impl Into<String>) -> Self {
        self.variables.insert(name.to_string(), value.into());
        self
    }

    pub fn schema_id(&self) -> String {
        self.template.schema_id()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskResponse {
    pub parsed: Value,
    pub raw: String,
    pub attempts: u32,
    pub provider_tag: String,
}

/// One failed attempt, kept for diagnosis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawAttempt {
    pub raw: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GatewayError {
    #[error("no provider binding configured for task class {0}")]
    NoBinding(TaskClass),
    #[error("no provider registered for binding kind {0}")]
    NoProvider(String),
    #[error("template {template} needs variable `{name}`")]
    MissingVariable { template: TemplateId, name: String },
    #[error("temperature {0} outside [0, 1]")]
    BadTemperature(f32),
    #[error("unmatched request: mock script has no entry for template {0}")]
    Unmatched(TemplateId),
    #[error("provider timed out on template {template} after {} attempt(s)", .attempts.len() + 1)]
    Timeout { template: TemplateId, attempts: Vec<RawAttempt> },
    #[error("template {template}: no schema-valid response after {} attempts", .attempts.len())]
    RetryExhausted { template: TemplateId, attempts: Vec<RawAttempt> },
    #[error("provider error on template {template}: {message}")]
    Provider { template: TemplateId, message: String },
}

impl GatewayError {
    /// Raw responses collected before the failure.
    pub fn raw_attempts(&self) -> &[RawAttempt] {
        match self {
            GatewayError::Timeout { attempts, .. } | GatewayError::RetryExhausted { attempts, .. } => attempts,
            _ => &[],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderError {
    #[error("timed out")]
    Timeout,
    #[error("unmatched request for template {0}")]
    Unmatched(TemplateId),
    #[error("{0}")]
    Transport(String),
}

/// What a provider receives for one attempt.
#[derive(Debug, Clone)]
pub struct ProviderCall<'a> {
    pub template: TemplateId,
    pub variables: &'a BTreeMap<String, String>,
    pub prompt: &'a str,
    pub model: &'a str,
    pub temperature: f32,
    pub attempt: u32,
}

pub trait ModelProvider: Send + Sync {
    fn tag(&self) -> String;
    fn complete(&self, call: &ProviderCall<'_>) -> Result<String, ProviderError>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditOutcome {
    Ok,
    SchemaError(String),
    ProviderError(String),
}

/// One provider call. Deliberately free of wall-clock fields so that audit
/// logs of mock runs compare byte-for-byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub seq: u64,
    pub template: TemplateId,
    pub prompt_version: String,
    pub task_class: TaskClass,
    pub provider_tag: String,
    pub model: String,
    pub attempt: u32,
    pub prompt_sha256: String,
    pub raw: Option<String>,
    pub outcome: AuditOutcome,
}

struct RateLimiter {
    min_interval: Duration,
    last: Mutex<Option<Instant>>,
}

impl RateLimiter {
    fn new(min_interval: Duration) -> Self {
        RateLimiter { min_interval, last: Mutex::new(None) }
    }

    fn acquire(&self) {
        if self.min_interval.is_zero() {
            return;
        }
        let mut last = self.last.lock().expect("rate limiter poisoned");
        if let Some(prev) = *last {
            let elapsed = prev.elapsed();
            if elapsed < self.min_interval {
                std::thread::sleep(self.min_interval - elapsed);
            }
        }
        *last = Some(Instant::now());
    }
}

pub struct Gateway {
    routing: RoutingConfig,
    providers: BTreeMap<String, Arc<dyn ModelProvider>>,
    mock: Option<Arc<MockProvider>>,
    limiters: BTreeMap<String, RateLimiter>,
    max_attempts: u32,
    audit: Mutex<Vec<AuditRecord>>,
    audit_sink: Option<Mutex<File>>,
}

impl Gateway {
    /// A gateway with live providers built from the routing table.
    pub fn new(routing: RoutingConfig) -> Self {
        let mut providers: BTreeMap<String, Arc<dyn ModelProvider>> = BTreeMap::new();
        let mut limiters = BTreeMap::new();
        for binding in routing.bindings.values() {
            let key = binding.key();
            limiters
                .entry(key.clone())
                .or_insert_with(|| RateLimiter::new(Duration::from_millis(binding.min_interval_ms)));
            if binding.kind != ProviderKind::Mock {
                providers.entry(key).or_insert_with(|| http::provider_for(binding));
            }
        }
        Gateway {
            routing,
            providers,
            mock: None,
            limiters,
            max_attempts: MAX_ATTEMPTS,
            audit: Mutex::new(Vec::new()),
            audit_sink: None,
        }
    }

    /// A gateway whose every call resolves against `script`.
    pub fn mock(script: MockScript) -> Self {
        let mut gw = Gateway::new(RoutingConfig::mock());
        gw.register_mock(script);
        gw
    }

    /// Route all subsequent calls to a scripted provider. Returns the provider
    /// handle for inspecting its invocation counter.
    pub fn register_mock(&mut self, script: MockScript) -> Arc<MockProvider> {
        let provider = Arc::new(MockProvider::new(script));
        self.mock = Some(provider.clone());
        provider
    }

    pub fn with_max_attempts(mut self, attempts: u32) -> Self {
        self.max_attempts = attempts.max(1);
        self
    }

    /// Also append audit records as JSON lines to `path`.
    pub fn with_audit_file(mut self, path: &Path) -> std::io::Result<Self> {
        let file = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
        self.audit_sink = Some(Mutex::new(file));
        Ok(self)
    }

    pub fn routing(&self) -> &RoutingConfig {
        &self.routing
    }

    pub fn mock_provider(&self) -> Option<&Arc<MockProvider>> {
        self.mock.as_ref()
    }

    pub fn route(&self, task: &TaskRequest) -> Result<&ProviderBinding, GatewayError> {
        self.routing.bindings.get(&task.task_class).ok_or(GatewayError::NoBinding(task.task_class))
    }

    pub fn audit_log(&self) -> Vec<AuditRecord> {
        self.audit.lock().expect("audit log poisoned").clone()
    }

    pub fn audit_len(&self) -> usize {
        self.audit.lock().expect("audit log poisoned").len()
    }

    fn provider_for(&self, binding: &ProviderBinding) -> Result<Arc<dyn ModelProvider>, GatewayError> {
        if let Some(mock) = &self.mock {
            return Ok(mock.clone());
        }
        self.providers
            .get(&binding.key())
            .cloned()
            .ok_or_else(|| GatewayError::NoProvider(binding.key()))
    }

    fn record(&self, mut rec: AuditRecord) {
        let mut log = self.audit.lock().expect("audit log poisoned");
        rec.seq = log.len() as u64;
        if let Some(sink) = &self.audit_sink {
            if let Ok(line) = serde_json::to_string(&rec) {
                let mut f = sink.lock().expect("audit sink poisoned");
                if let Err(e) = writeln!(f, "{line}") {
                    log::warn!("audit sink write failed: {e}");
                }
            }
        }
        log.push(rec);
    }

    /// Run a task to a schema-valid response.
    pub fn execute(&self, task: &TaskRequest) -> Result<TaskResponse, GatewayError> {
        let binding = self.route(task)?;
        if let Some(t) = task.temperature {
            if !(0.0..=1.0).contains(&t) {
                return Err(GatewayError::BadTemperature(t));
            }
        }
        let base_prompt = task
            .template
            .render(&task.variables)
            .map_err(|name| GatewayError::MissingVariable { template: task.template, name: name.to_string() })?;
        let provider = self.provider_for(binding)?;
        let provider_tag = provider.tag();
        let temperature = task.temperature.unwrap_or(binding.temperature);
        let limiter = self.limiters.get(&binding.key());

        let mut failures: Vec<RawAttempt> = Vec::new();
        for attempt in 1..=self.max_attempts {
            let mut prompt = format!("{base_prompt}\n{}", templates::json_instruction());
            if let Some(prev) = failures.last() {
                prompt.push_str(&format!(
                    "\n\nYour previous response was:\n{}\nIt was rejected: {}\nReturn corrected JSON only.",
                    prev.raw, prev.error
                ));
            }
            if self.mock.is_none() {
                if let Some(l) = limiter {
                    l.acquire();
                }
            }
            let call = ProviderCall {
                template: task.template,
                variables: &task.variables,
                prompt: &prompt,
                model: &binding.model,
                temperature,
                attempt,
            };
            let mut rec = AuditRecord {
                seq: 0,
                template: task.template,
                prompt_version: task.template.prompt_version(),
                task_class: task.task_class,
                provider_tag: provider_tag.clone(),
                model: binding.model.clone(),
                attempt,
                prompt_sha256: crate::document::content_hash(&prompt),
                raw: None,
                outcome: AuditOutcome::Ok,
            };
            let raw = match provider.complete(&call) {
                Ok(raw) => raw,
                Err(err) => {
                    rec.outcome = AuditOutcome::ProviderError(err.to_string());
                    self.record(rec);
                    return Err(match err {
                        ProviderError::Timeout => GatewayError::Timeout { template: task.template, attempts: failures },
                        ProviderError::Unmatched(t) => GatewayError::Unmatched(t),
                        ProviderError::Transport(message) => {
                            GatewayError::Provider { template: task.template, message }
                        }
                    });
                }
            };
            rec.raw = Some(raw.clone());
            match schema::validate(task.template, &raw) {
                Ok(parsed) => {
                    self.record(rec);
                    return Ok(TaskResponse { parsed, raw, attempts: attempt, provider_tag });
                }
                Err(error) => {
                    log::debug!("{} attempt {attempt} failed validation: {error}", task.template);
                    rec.outcome = AuditOutcome::SchemaError(error.clone());
                    self.record(rec);
                    failures.push(RawAttempt { raw, error });
                }
            }
        }
        Err(GatewayError::RetryExhausted { template: task.template, attempts: failures })
    }

    /// [`execute`](Self::execute) and decode the validated value.
    pub fn execute_as<T: DeserializeOwned>(&self, task: &TaskRequest) -> Result<(T, TaskResponse), GatewayError> {
        let resp = self.execute(task)?;
        let typed = T::deserialize(&resp.parsed).map_err(|e| GatewayError::RetryExhausted {
            template: task.template,
            attempts: vec![RawAttempt { raw: resp.raw.clone(), error: e.to_string() }],
        })?;
        Ok((typed, resp))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn seg_request() -> TaskRequest {
        TaskRequest::new(TemplateId::SegmentIdea).var("idea", "A. B. C.")
    }

    fn three_segments() -> Value {
        json!({"segments": [
            {"facet": "problem", "text": "A."},
            {"facet": "contribution", "text": "B."},
            {"facet": "evaluation", "text": "C."}
        ]})
    }

    #[test]
    fn valid_first_response_takes_one_attempt() {
        let gw = Gateway::mock(MockScript::new().with(MockEntry::new(TemplateId::SegmentIdea).respond(three_segments())));
        let resp = gw.execute(&seg_request()).unwrap();
        assert_eq!(resp.attempts, 1);
        assert_eq!(resp.provider_tag, "mock");
        assert_eq!(resp.parsed["segments"].as_array().unwrap().len(), 3);
    }

    #[test]
    fn two_malformed_then_valid_takes_three_attempts() {
        let gw = Gateway::mock(
            MockScript::new().with(MockEntry::new(TemplateId::SegmentIdea).malformed(2).respond(three_segments())),
        );
        let resp = gw.execute(&seg_request()).unwrap();
        assert_eq!(resp.attempts, 3);
        assert_eq!(gw.mock_provider().unwrap().invocations(), 3);
        assert_eq!(gw.audit_len(), 3);
    }

    #[test]
    fn three_malformed_exhausts_retries() {
        let gw = Gateway::mock(
            MockScript::new().with(MockEntry::new(TemplateId::SegmentIdea).malformed(3).respond(three_segments())),
        );
        let err = gw.execute(&seg_request()).unwrap_err();
        assert!(matches!(err, GatewayError::RetryExhausted { .. }));
        assert_eq!(err.raw_attempts().len(), 3);
        assert!(err.raw_attempts().iter().all(|a| a.raw == mock::DEFAULT_MALFORMED));
        assert_eq!(gw.audit_len(), 3);
    }

    #[test]
    fn empty_script_names_template() {
        let gw = Gateway::mock(MockScript::new());
        let err = gw.execute(&seg_request()).unwrap_err();
        assert_eq!(err, GatewayError::Unmatched(TemplateId::SegmentIdea));
        assert!(err.to_string().contains("segment_idea"));
        assert_eq!(gw.audit_len(), 1);
    }

    #[test]
    fn timeout_is_reported() {
        let gw = Gateway::mock(MockScript::new().with(MockEntry::new(TemplateId::SegmentIdea).timing_out()));
        assert!(matches!(gw.execute(&seg_request()), Err(GatewayError::Timeout { .. })));
    }

    #[test]
    fn repeated_request_gets_identical_bytes() {
        let gw = Gateway::mock(MockScript::new().with(MockEntry::new(TemplateId::SegmentIdea).respond(three_segments())));
        let a = gw.execute(&seg_request()).unwrap();
        let b = gw.execute(&seg_request()).unwrap();
        assert_eq!(a.raw.as_bytes(), b.raw.as_bytes());
    }

    #[test]
    fn script_keyed_on_segmentation_ignores_other_templates() {
        let gw = Gateway::mock(MockScript::new().with(MockEntry::new(TemplateId::SegmentIdea).respond(three_segments())));
        assert!(gw.execute(&seg_request()).is_ok());
        let other = TaskRequest::new(TemplateId::RankClusters)
            .var("facet_type", "problem")
            .var("facet_text", "x")
            .var("cluster_names", "- a");
        assert_eq!(gw.execute(&other).unwrap_err(), GatewayError::Unmatched(TemplateId::RankClusters));
    }

    #[test]
    fn missing_variable_rejected_before_any_call() {
        let gw = Gateway::mock(MockScript::new());
        let err = gw.execute(&TaskRequest::new(TemplateId::SegmentIdea)).unwrap_err();
        assert!(matches!(err, GatewayError::MissingVariable { .. }));
        assert_eq!(gw.audit_len(), 0);
    }

    #[test]
    fn routes_by_class() {
        let gw = Gateway::new(RoutingConfig::default());
        let structured = gw.route(&TaskRequest::new(TemplateId::SegmentIdea)).unwrap();
        assert_eq!(structured.model, "gpt-4o");
        let long = gw.route(&TaskRequest::new(TemplateId::ClusterFacet)).unwrap();
        assert_eq!(long.kind, ProviderKind::Anthropic);
        let reasoning = gw.route(&TaskRequest::new(TemplateId::BuildGraph)).unwrap();
        assert_eq!(reasoning.model, "o3");
    }

    #[test]
    fn missing_binding_is_configuration_error() {
        let mut routing = RoutingConfig::default();
        routing.bindings.remove(&TaskClass::LongContext);
        let gw = Gateway::new(routing);
        let err = gw.route(&TaskRequest::new(TemplateId::ClusterFacet)).unwrap_err();
        assert_eq!(err, GatewayError::NoBinding(TaskClass::LongContext));
    }

    #[test]
    fn unknown_class_rejected_at_decode() {
        let bad = r#"{"task_class": "creative", "template": "segment_idea", "variables": {}}"#;
        assert!(serde_json::from_str::<TaskRequest>(bad).is_err());
    }
}
