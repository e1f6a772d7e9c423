//! Application configuration, loaded from TOML.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CorpusConfig, RecordedBackend, ScholarlyBackend, SemanticScholarBackend};
use crate::facets::DEFAULT_EXTRACTION_BUDGET;
use crate::gateway::RoutingConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("backend fixture: {0}")]
    Backend(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendConfig {
    SemanticScholar {
        #[serde(default)]
        base_url: Option<String>,
        #[serde(default)]
        api_key_env: Option<String>,
    },
    Recorded {
        path: PathBuf,
    },
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig::SemanticScholar { base_url: None, api_key_env: Some("S2_API_KEY".into()) }
    }
}

impl BackendConfig {
    pub fn build(&self) -> Result<Arc<dyn ScholarlyBackend>, ConfigError> {
        Ok(match self {
            BackendConfig::SemanticScholar { base_url, api_key_env } => {
                Arc::new(SemanticScholarBackend::new(base_url.clone(), api_key_env.as_deref()))
            }
            BackendConfig::Recorded { path } => Arc::new(RecordedBackend::load(path).map_err(ConfigError::Backend)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppConfig {
    #[serde(default)]
    pub routing: RoutingConfig,
    #[serde(default)]
    pub corpus: CorpusConfig,
    #[serde(default)]
    pub backend: BackendConfig,
    /// Characters of paper text per extraction call.
    #[serde(default = "default_budget")]
    pub extraction_budget: usize,
    /// Parallel model calls for per-paper tasks.
    #[serde(default = "default_llm_concurrency")]
    pub llm_concurrency: usize,
    #[serde(default)]
    pub allow_add_paper: bool,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    #[serde(default = "default_data_dir")]
    pub data_dir: PathBuf,
    /// Mock script used for every task class when set.
    #[serde(default)]
    pub mock_script: Option<PathBuf>,
    #[serde(default)]
    pub audit_file: Option<PathBuf>,
}

fn default_budget() -> usize {
    DEFAULT_EXTRACTION_BUDGET
}

fn default_llm_concurrency() -> usize {
    4
}

fn default_data_dir() -> PathBuf {
    PathBuf::from("facetlit-data")
}

impl Default for AppConfig {
    fn default() -> Self {
        AppConfig {
            routing: RoutingConfig::default(),
            corpus: CorpusConfig::default(),
            backend: BackendConfig::default(),
            extraction_budget: default_budget(),
            llm_concurrency: default_llm_concurrency(),
            allow_add_paper: false,
            cache_dir: None,
            data_dir: default_data_dir(),
            mock_script: None,
            audit_file: None,
        }
    }
}

impl AppConfig {
    pub fn from_toml(text: &str) -> Result<AppConfig, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn load(path: &Path) -> Result<AppConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_toml(&text).map_err(|message| ConfigError::Parse { path: path.to_path_buf(), message })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = AppConfig::from_toml("").unwrap();
        assert_eq!(c, AppConfig::default());
        assert!(!c.allow_add_paper);
        assert_eq!(c.corpus.seed_limit, 50);
    }

    #[test]
    fn recorded_backend_and_overrides() {
        let c = AppConfig::from_toml(
            r#"
            allow_add_paper = true
            llm_concurrency = 2
            [corpus]
            seed_limit = 10
            [backend]
            kind = "recorded"
            path = "fixtures/backend.json"
            "#,
        )
        .unwrap();
        assert_eq!(c.corpus.seed_limit, 10);
        assert_eq!(c.backend, BackendConfig::Recorded { path: "fixtures/backend.json".into() });
        assert!(c.backend.build().is_err());
    }

    #[test]
    fn unknown_backend_kind_rejected() {
        assert!(AppConfig::from_toml("[backend]\nkind = \"arxiv\"").is_err());
    }
}
