//! Scholarly search, metadata, and full-text backends.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::OnceLock;
use std::time::Duration;

use reqwest::blocking::Client;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("backend unreachable: {0}")]
    Unreachable(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("backend error: {0}")]
    Other(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaperMetadata {
    pub paper_id: String,
    pub title: String,
    #[serde(default)]
    pub abstract_text: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FullText {
    pub sections: BTreeMap<String, String>,
    /// Citation marker → cited paper id.
    #[serde(default)]
    pub references: BTreeMap<String, String>,
}

pub trait ScholarlyBackend: Send + Sync {
    /// Paper ids relevant to a free-text query, best first.
    fn search(&self, query: &str, limit: usize) -> Result<Vec<String>, BackendError>;
    fn metadata(&self, paper_id: &str) -> Result<PaperMetadata, BackendError>;
    /// `Ok(None)` when the paper exists but no full text is available.
    fn full_text(&self, paper_id: &str) -> Result<Option<FullText>, BackendError>;
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordedPaper {
    pub title: String,
    #[serde(rename = "abstract", default)]
    pub abstract_text: String,
    #[serde(default)]
    pub sections: BTreeMap<String, String>,
    #[serde(default)]
    pub references: BTreeMap<String, String>,
}

/// Backend answering from recorded responses. Ids absent from `papers` are
/// unresolvable.
#[derive(Debug, Default, Serialize, Deserialize)]
pub struct RecordedBackend {
    /// Exact query text → result ids.
    #[serde(default)]
    pub searches: BTreeMap<String, Vec<String>>,
    /// Used when a query has no exact recording.
    #[serde(default)]
    pub default_search: Vec<String>,
    #[serde(default)]
    pub papers: BTreeMap<String, RecordedPaper>,
    /// Simulate an unreachable service.
    #[serde(default)]
    pub unreachable: bool,
    #[serde(skip)]
    calls: AtomicUsize,
}

impl RecordedBackend {
    pub fn load(path: &Path) -> Result<RecordedBackend, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn add_paper(
        &mut self,
        id: &str,
        title: &str,
        abstract_text: &str,
        sections: &[(&str, &str)],
        references: &[(&str, &str)],
    ) {
        self.papers.insert(
            id.to_string(),
            RecordedPaper {
                title: title.to_string(),
                abstract_text: abstract_text.to_string(),
                sections: sections.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
                references: references.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
            },
        );
    }

    /// Total backend calls served.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    fn hit(&self) -> Result<(), BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        if self.unreachable {
            Err(BackendError::Unreachable("recorded backend marked unreachable".into()))
        } else {
            Ok(())
        }
    }
}

impl ScholarlyBackend for RecordedBackend {
    fn search(&self, query: &str, limit: usize) -> Result<Vec<String>, BackendError> {
        self.hit()?;
        let ids = self.searches.get(query).unwrap_or(&self.default_search);
        Ok(ids.iter().take(limit).cloned().collect())
    }

    fn metadata(&self, paper_id: &str) -> Result<PaperMetadata, BackendError> {
        self.hit()?;
        let p = self.papers.get(paper_id).ok_or_else(|| BackendError::NotFound(paper_id.to_string()))?;
        Ok(PaperMetadata {
            paper_id: paper_id.to_string(),
            title: p.title.clone(),
            abstract_text: (!p.abstract_text.is_empty()).then(|| p.abstract_text.clone()),
        })
    }

    fn full_text(&self, paper_id: &str) -> Result<Option<FullText>, BackendError> {
        self.hit()?;
        let p = self.papers.get(paper_id).ok_or_else(|| BackendError::NotFound(paper_id.to_string()))?;
        if p.sections.is_empty() {
            return Ok(None);
        }
        Ok(Some(FullText { sections: p.sections.clone(), references: p.references.clone() }))
    }
}

const S2_BASE: &str = "https://api.semanticscholar.org/graph/v1";

/// Semantic Scholar Academic Graph and snippet endpoints.
pub struct SemanticScholarBackend {
    base: String,
    api_key: Option<String>,
    snippet_limit: usize,
    client: OnceLock<Result<Client, String>>,
}

impl SemanticScholarBackend {
    /// `api_key_env` names the environment variable holding the key.
    pub fn new(base: Option<String>, api_key_env: Option<&str>) -> Self {
        SemanticScholarBackend {
            base: base.unwrap_or_else(|| S2_BASE.to_string()),
            api_key: api_key_env.and_then(|n| std::env::var(n).ok()),
            snippet_limit: 100,
            client: OnceLock::new(),
        }
    }

    fn get(&self, path: &str, query: &[(&str, String)]) -> Result<Value, BackendError> {
        let client = self
            .client
            .get_or_init(|| Client::builder().timeout(Duration::from_secs(60)).build().map_err(|e| e.to_string()))
            .as_ref()
            .map_err(|e| BackendError::Other(e.clone()))?;
        let url = format!("{}/{}", self.base.trim_end_matches('/'), path);
        let mut req = client.get(&url).query(query);
        if let Some(k) = &self.api_key {
            req = req.header("x-api-key", k);
        }
        let resp = req.send().map_err(|e| BackendError::Unreachable(e.to_string()))?;
        let status = resp.status();
        if status.as_u16() == 404 {
            return Err(BackendError::NotFound(path.to_string()));
        }
        let text = resp.text().map_err(|e| BackendError::Unreachable(e.to_string()))?;
        if !status.is_success() {
            return Err(BackendError::Other(format!("{url} returned {status}: {text}")));
        }
        serde_json::from_str(&text).map_err(|e| BackendError::Other(format!("{url}: {e}")))
    }
}

pub(crate) fn parse_search(v: &Value) -> Vec<String> {
    v.get("data")
        .and_then(Value::as_array)
        .map(|rows| rows.iter().filter_map(|r| r.get("paperId").and_then(Value::as_str)).map(str::to_string).collect())
        .unwrap_or_default()
}

pub(crate) fn parse_metadata(v: &Value, requested: &str) -> PaperMetadata {
    PaperMetadata {
        paper_id: v.get("paperId").and_then(Value::as_str).unwrap_or(requested).to_string(),
        title: v.get("title").and_then(Value::as_str).unwrap_or_default().to_string(),
        abstract_text: v.get("abstract").and_then(Value::as_str).map(str::to_string),
    }
}

/// Group snippet passages by section and collect reference mentions that
/// resolved to a corpus id.
pub(crate) fn parse_snippets(v: &Value) -> FullText {
    let mut ft = FullText::default();
    let rows = v.get("data").and_then(Value::as_array).cloned().unwrap_or_default();
    for row in rows {
        let Some(snippet) = row.get("snippet") else { continue };
        let Some(text) = snippet.get("text").and_then(Value::as_str) else { continue };
        let section = snippet
            .get("section")
            .and_then(Value::as_str)
            .filter(|s| !s.is_empty())
            .or_else(|| snippet.get("snippetKind").and_then(Value::as_str))
            .unwrap_or("body")
            .to_string();
        let body = ft.sections.entry(section).or_default();
        if !body.is_empty() {
            body.push('\n');
        }
        body.push_str(text);
        let mentions = snippet.pointer("/annotations/refMentions").and_then(Value::as_array).cloned().unwrap_or_default();
        for m in mentions {
            let (Some(start), Some(end)) = (m.get("start").and_then(Value::as_u64), m.get("end").and_then(Value::as_u64))
            else {
                continue;
            };
            let Some(corpus_id) = m.get("matchedPaperCorpusId").and_then(|c| match c {
                Value::String(s) => Some(s.clone()),
                Value::Number(n) => Some(n.to_string()),
                _ => None,
            }) else {
                continue;
            };
            let chars: Vec<char> = text.chars().collect();
            let (s, e) = (start as usize, end as usize);
            if s < e && e <= chars.len() {
                let marker: String = chars[s..e].iter().collect();
                ft.references.insert(marker, format!("CorpusId:{corpus_id}"));
            }
        }
    }
    ft
}

impl ScholarlyBackend for SemanticScholarBackend {
    fn search(&self, query: &str, limit: usize) -> Result<Vec<String>, BackendError> {
        let v = self.get(
            "paper/search",
            &[("query", query.to_string()), ("limit", limit.min(100).to_string()), ("fields", "paperId".into())],
        )?;
        Ok(parse_search(&v))
    }

    fn metadata(&self, paper_id: &str) -> Result<PaperMetadata, BackendError> {
        let v = self.get(&format!("paper/{paper_id}"), &[("fields", "paperId,title,abstract".into())])?;
        Ok(parse_metadata(&v, paper_id))
    }

    fn full_text(&self, paper_id: &str) -> Result<Option<FullText>, BackendError> {
        let meta = self.metadata(paper_id)?;
        let v = self.get(
            "snippet/search",
            &[
                ("query", meta.title.clone()),
                ("paperIds", paper_id.to_string()),
                ("limit", self.snippet_limit.to_string()),
            ],
        )?;
        let ft = parse_snippets(&v);
        Ok((!ft.sections.is_empty()).then_some(ft))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn recorded_backend_counts_calls() {
        let mut b = RecordedBackend::default();
        b.searches.insert("q".into(), vec!["a".into(), "b".into()]);
        assert_eq!(b.search("q", 1).unwrap(), vec!["a"]);
        assert!(b.search("other", 5).unwrap().is_empty());
        assert!(matches!(b.metadata("zzz"), Err(BackendError::NotFound(_))));
        assert_eq!(b.calls(), 3);
    }

    #[test]
    fn parses_search_and_metadata() {
        let v = json!({"total": 2, "data": [{"paperId": "a1"}, {"paperId": "b2"}, {"title": "no id"}]});
        assert_eq!(parse_search(&v), vec!["a1", "b2"]);
        let m = parse_metadata(&json!({"paperId": "a1", "title": "T", "abstract": null}), "a1");
        assert_eq!(m.title, "T");
        assert_eq!(m.abstract_text, None);
    }

    #[test]
    fn parses_snippets_into_sections_and_references() {
        let v = json!({"data": [
            {"snippet": {"text": "Prior work [3] fails.", "section": "Limitations",
                "annotations": {"refMentions": [{"start": 11, "end": 14, "matchedPaperCorpusId": 42}]}}},
            {"snippet": {"text": "More text.", "section": "Limitations"}},
            {"snippet": {"text": "Title text", "snippetKind": "title"}}
        ]});
        let ft = parse_snippets(&v);
        assert_eq!(ft.sections["Limitations"], "Prior work [3] fails.\nMore text.");
        assert_eq!(ft.sections["title"], "Title text");
        assert_eq!(ft.references["[3]"], "CorpusId:42");
    }
}
