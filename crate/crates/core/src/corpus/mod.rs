//! The literature set: seed retrieval, full-text fetch, one-hop citation
//! expansion, user additions, and JSON persistence.

pub mod backend;
pub mod cache;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::facets::{FacetFamily, FacetStatements};
pub use backend::{BackendError, FullText, PaperMetadata, RecordedBackend, ScholarlyBackend, SemanticScholarBackend};
pub use cache::PaperCache;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelevanceCategory {
    PerfectlyRelevant,
    SomewhatRelevant,
    Complementary,
    NotRelevant,
}

impl RelevanceCategory {
    /// 0 is most relevant.
    pub fn rank(self) -> u8 {
        match self {
            RelevanceCategory::PerfectlyRelevant => 0,
            RelevanceCategory::SomewhatRelevant => 1,
            RelevanceCategory::Complementary => 2,
            RelevanceCategory::NotRelevant => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RelevanceCategory::PerfectlyRelevant => "perfectly_relevant",
            RelevanceCategory::SomewhatRelevant => "somewhat_relevant",
            RelevanceCategory::Complementary => "complementary",
            RelevanceCategory::NotRelevant => "not_relevant",
        }
    }
}

impl fmt::Display for RelevanceCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    SeedRetrieval,
    CitationExpansion,
    UserAdded,
}

impl Provenance {
    pub fn rank(self) -> u8 {
        match self {
            Provenance::SeedRetrieval => 0,
            Provenance::CitationExpansion => 1,
            Provenance::UserAdded => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FetchStatus {
    FullText,
    AbstractOnly,
    MetadataOnly,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaperRecord {
    pub paper_id: String,
    #[serde(default)]
    pub title: String,
    #[serde(rename = "abstract", default)]
    pub abstract_text: String,
    #[serde(default)]
    pub sections: BTreeMap<String, String>,
    /// Citation marker as it appears in the text → cited paper id.
    #[serde(default)]
    pub references: BTreeMap<String, String>,
    #[serde(default)]
    pub facets: FacetStatements,
    /// Prompt version each facet family was extracted with.
    #[serde(default)]
    pub facet_versions: BTreeMap<FacetFamily, String>,
    #[serde(default)]
    pub relevance: Option<RelevanceCategory>,
    provenance: Provenance,
    /// The citing paper, for citation-expansion records.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expanded_from: Option<String>,
    pub fetch_status: FetchStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fetch_note: Option<String>,
    /// False until a fetch has been attempted.
    #[serde(default)]
    pub fetched: bool,
}

impl PaperRecord {
    pub fn new(paper_id: impl Into<String>, provenance: Provenance) -> Self {
        PaperRecord {
            paper_id: paper_id.into(),
            title: String::new(),
            abstract_text: String::new(),
            sections: BTreeMap::new(),
            references: BTreeMap::new(),
            facets: FacetStatements::default(),
            facet_versions: BTreeMap::new(),
            relevance: None,
            provenance,
            expanded_from: None,
            fetch_status: FetchStatus::MetadataOnly,
            fetch_note: None,
            fetched: false,
        }
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// Every stored text passage, labeled: title, abstract, then sections.
    pub fn passages(&self) -> impl Iterator<Item = (&str, &str)> {
        [("title", self.title.as_str()), ("abstract", self.abstract_text.as_str())]
            .into_iter()
            .filter(|(_, t)| !t.is_empty())
            .chain(self.sections.iter().map(|(k, v)| (k.as_str(), v.as_str())))
    }

    /// Text the extractor reads: sections when present, otherwise the abstract.
    pub fn extraction_sections(&self) -> Vec<(String, String)> {
        if !self.sections.is_empty() {
            self.sections.iter().map(|(k, v)| (k.clone(), v.clone())).collect()
        } else if !self.abstract_text.is_empty() {
            vec![("abstract".to_string(), self.abstract_text.clone())]
        } else {
            Vec::new()
        }
    }

    fn absorb_fetch(&mut self, fetched: PaperRecord) {
        self.title = fetched.title;
        self.abstract_text = fetched.abstract_text;
        self.sections = fetched.sections;
        self.references = fetched.references;
        self.fetch_status = fetched.fetch_status;
        self.fetch_note = fetched.fetch_note;
        self.fetched = true;
        if self.facet_versions.is_empty() {
            self.facets = fetched.facets;
            self.facet_versions = fetched.facet_versions;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ExpansionFailure {
    pub citing: String,
    pub cited: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStore {
    pub papers: BTreeMap<String, PaperRecord>,
    pub expansion_failures: Vec<ExpansionFailure>,
}

impl CorpusStore {
    pub fn len(&self) -> usize {
        self.papers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.papers.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&PaperRecord> {
        self.papers.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.papers.contains_key(id)
    }

    pub fn ids(&self) -> BTreeSet<String> {
        self.papers.keys().cloned().collect()
    }

    /// Insert a new record. Existing records, and so their provenance, are
    /// never replaced.
    pub fn insert(&mut self, record: PaperRecord) -> bool {
        if self.papers.contains_key(&record.paper_id) {
            return false;
        }
        self.papers.insert(record.paper_id.clone(), record);
        true
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("idea text is empty")]
    EmptyQuery,
    #[error("paper search failed: {0}")]
    Retrieval(BackendError),
    #[error("paper {0} could not be resolved: {1}")]
    Unresolvable(String, BackendError),
    #[error("unknown paper {0}")]
    UnknownPaper(String),
    #[error("{}: parse error at line {line}, column {column}: {message}", path.display())]
    Corrupt { path: PathBuf, line: usize, column: usize, message: String },
    #[error("{}: record is for {found}, expected {expected}", path.display())]
    Mismatch { path: PathBuf, expected: String, found: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AddOutcome {
    Added,
    AlreadyPresent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusConfig {
    #[serde(default = "default_seed_limit")]
    pub seed_limit: usize,
    #[serde(default = "default_concurrency")]
    pub fetch_concurrency: usize,
}

fn default_seed_limit() -> usize {
    50
}

fn default_concurrency() -> usize {
    4
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig { seed_limit: default_seed_limit(), fetch_concurrency: default_concurrency() }
    }
}

/// Report from one expansion pass.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExpansionReport {
    pub added: Vec<String>,
    pub failed: Vec<String>,
}

/// Corpus operations against a scholarly backend and an optional cache.
#[derive(Clone)]
pub struct CorpusBuilder {
    backend: Arc<dyn ScholarlyBackend>,
    cache: Option<PaperCache>,
    config: CorpusConfig,
}

impl CorpusBuilder {
    pub fn new(backend: Arc<dyn ScholarlyBackend>, config: CorpusConfig) -> Self {
        CorpusBuilder { backend, cache: None, config }
    }

    pub fn with_cache(mut self, cache: PaperCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn config(&self) -> &CorpusConfig {
        &self.config
    }

    pub fn cache(&self) -> Option<&PaperCache> {
        self.cache.as_ref()
    }

    /// Search with the idea text and add unseen hits as seed records. Returns
    /// the de-duplicated hit list in backend order.
    pub fn retrieve_seed(&self, store: &mut CorpusStore, idea_text: &str) -> Result<Vec<String>, CorpusError> {
        if idea_text.trim().is_empty() {
            return Err(CorpusError::EmptyQuery);
        }
        let hits = self.backend.search(idea_text, self.config.seed_limit).map_err(CorpusError::Retrieval)?;
        let mut seen = BTreeSet::new();
        let ids: Vec<String> = hits
            .into_iter()
            .filter(|id| !id.is_empty() && seen.insert(id.clone()))
            .take(self.config.seed_limit)
            .collect();
        for id in &ids {
            store.insert(PaperRecord::new(id.clone(), Provenance::SeedRetrieval));
        }
        Ok(ids)
    }

    /// Fetch one paper's content. Never fails hard: missing content degrades
    /// `fetch_status` and records the reason.
    pub fn fetch_fulltext(&self, record: &PaperRecord) -> PaperRecord {
        let mut out = record.clone();
        if let Some(cached) = self.cache.as_ref().and_then(|c| c.get(&record.paper_id)) {
            if cached.fetched {
                out.absorb_fetch(cached);
                return out;
            }
        }
        let mut fetched = PaperRecord::new(record.paper_id.clone(), record.provenance);
        let mut notes = Vec::new();
        match self.backend.metadata(&record.paper_id) {
            Ok(meta) => {
                fetched.title = meta.title;
                fetched.abstract_text = meta.abstract_text.unwrap_or_default();
            }
            Err(e) => notes.push(format!("metadata unavailable: {e}")),
        }
        match self.backend.full_text(&record.paper_id) {
            Ok(Some(ft)) if !ft.sections.is_empty() => {
                fetched.sections = ft.sections;
                fetched.references = ft.references;
            }
            Ok(_) => notes.push("full text unavailable".to_string()),
            Err(e) => notes.push(format!("full text unavailable: {e}")),
        }
        fetched.fetch_status = if !fetched.sections.is_empty() {
            FetchStatus::FullText
        } else if !fetched.abstract_text.is_empty() {
            FetchStatus::AbstractOnly
        } else {
            FetchStatus::MetadataOnly
        };
        fetched.fetch_note = (!notes.is_empty()).then(|| notes.join("; "));
        out.absorb_fetch(fetched);
        self.store_in_cache(&out);
        out
    }

    /// Write a record to the cache, if any. Cache failures only warn.
    pub fn store_in_cache(&self, record: &PaperRecord) {
        if let Some(cache) = &self.cache {
            if let Err(e) = cache.put(record) {
                log::warn!("could not cache {}: {e}", record.paper_id);
            }
        }
    }

    /// Fetch every not-yet-fetched paper, `fetch_concurrency` at a time.
    pub fn fetch_pending(&self, store: &mut CorpusStore) {
        let pending: Vec<PaperRecord> = store.papers.values().filter(|p| !p.fetched).cloned().collect();
        let width = self.config.fetch_concurrency.max(1);
        for chunk in pending.chunks(width) {
            let results: Vec<PaperRecord> = std::thread::scope(|scope| {
                let handles: Vec<_> = chunk.iter().map(|rec| scope.spawn(move || self.fetch_fulltext(rec))).collect();
                handles.into_iter().map(|h| h.join().expect("fetch worker panicked")).collect()
            });
            for rec in results {
                store.papers.insert(rec.paper_id.clone(), rec);
            }
        }
    }

    /// One-hop expansion: every paper cited inside an extracted facet statement
    /// of a non-expansion paper is added, or recorded as a failure.
    pub fn expand_citations(&self, store: &mut CorpusStore) -> ExpansionReport {
        let mut cited: BTreeMap<String, String> = BTreeMap::new();
        for paper in store.papers.values() {
            if paper.provenance == Provenance::CitationExpansion {
                continue;
            }
            for (_, stmt) in paper.facets.iter() {
                for id in &stmt.citations {
                    if !store.papers.contains_key(id) {
                        cited.entry(id.clone()).or_insert_with(|| paper.paper_id.clone());
                    }
                }
            }
        }
        let mut report = ExpansionReport::default();
        for (id, citing) in cited {
            match self.backend.metadata(&id) {
                Ok(meta) => {
                    let mut rec = PaperRecord::new(id.clone(), Provenance::CitationExpansion);
                    rec.expanded_from = Some(citing);
                    rec.title = meta.title;
                    rec.abstract_text = meta.abstract_text.unwrap_or_default();
                    store.insert(rec);
                    report.added.push(id);
                }
                Err(e) => {
                    let failure = ExpansionFailure { citing, cited: id.clone(), reason: e.to_string() };
                    if !store.expansion_failures.iter().any(|f| f.cited == failure.cited) {
                        store.expansion_failures.push(failure);
                    }
                    report.failed.push(id);
                }
            }
        }
        report
    }

    /// Add a paper by id on the user's request.
    pub fn add_paper(&self, store: &mut CorpusStore, paper_id: &str) -> Result<AddOutcome, CorpusError> {
        if store.contains(paper_id) {
            return Ok(AddOutcome::AlreadyPresent);
        }
        let meta = self
            .backend
            .metadata(paper_id)
            .map_err(|e| CorpusError::Unresolvable(paper_id.to_string(), e))?;
        let mut rec = PaperRecord::new(paper_id, Provenance::UserAdded);
        rec.title = meta.title;
        rec.abstract_text = meta.abstract_text.unwrap_or_default();
        let rec = self.fetch_fulltext(&rec);
        store.insert(rec);
        Ok(AddOutcome::Added)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format: String,
    papers: Vec<ManifestEntry>,
    expansion_failures: Vec<ExpansionFailure>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestEntry {
    paper_id: String,
    file: String,
}

const MANIFEST_FORMAT: &str = "facetlit-corpus/1";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io { path: path.to_path_buf(), source }
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| CorpusError::Corrupt {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

/// Write the corpus as one JSON file per paper plus `manifest.json`.
pub fn persist(store: &CorpusStore, dir: &Path) -> Result<(), CorpusError> {
    let papers_dir = dir.join("papers");
    std::fs::create_dir_all(&papers_dir).map_err(io_err(&papers_dir))?;
    let mut entries = Vec::new();
    for rec in store.papers.values() {
        let file = cache::file_name(&rec.paper_id);
        let path = papers_dir.join(&file);
        let text = serde_json::to_string_pretty(rec).expect("records serialize");
        std::fs::write(&path, text).map_err(io_err(&path))?;
        entries.push(ManifestEntry { paper_id: rec.paper_id.clone(), file });
    }
    let manifest = Manifest {
        format: MANIFEST_FORMAT.to_string(),
        papers: entries,
        expansion_failures: store.expansion_failures.clone(),
    };
    let path = dir.join("manifest.json");
    std::fs::write(&path, serde_json::to_string_pretty(&manifest).expect("manifest serializes")).map_err(io_err(&path))
}

pub fn load(dir: &Path) -> Result<CorpusStore, CorpusError> {
    let manifest: Manifest = parse_json(&dir.join("manifest.json"))?;
    let mut store = CorpusStore { papers: BTreeMap::new(), expansion_failures: manifest.expansion_failures };
    for entry in manifest.papers {
        let path = dir.join("papers").join(&entry.file);
        let rec: PaperRecord = parse_json(&path)?;
        if rec.paper_id != entry.paper_id {
            return Err(CorpusError::Mismatch { path, expected: entry.paper_id, found: rec.paper_id });
        }
        store.papers.insert(rec.paper_id.clone(), rec);
    }
    Ok(store)
}
