//! Sessions: one idea document with its corpus, organization, selection,
//! and assessment history.

mod report;
mod service;
mod store;

pub use report::render_report;
pub use service::*;
pub use store::SessionStore;

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CorpusError, CorpusStore};
use crate::document::{DocumentError, FacetType, IdeaDocument, SegmentId};
use crate::facets::FacetError;
use crate::organizer::{FacetCluster, OrganizerError, RelevanceRanking};
use crate::pivot::{FacetAssessment, FullAssessment, PivotError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Queued,
    RetrievingSeed,
    FetchingPapers,
    ExtractingFacets,
    ExpandingCitations,
    ClassifyingRelevance,
    Clustering,
    SegmentingIdea,
    Ready,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub phase: Phase,
    #[serde(default)]
    pub message: String,
}

impl Progress {
    pub fn new(phase: Phase, message: impl Into<String>) -> Self {
        Progress { phase, message: message.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum RewriteAction {
    Accept,
    EditThenAccept { text: String },
    Reject,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewriteDecision {
    pub action: RewriteAction,
    /// Text written into the document, for accepted rewrites.
    #[serde(default)]
    pub applied_text: Option<String>,
    pub doc_version: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssessmentRecord {
    pub assessment_id: String,
    /// Document version the assessment was computed against.
    pub doc_version: u64,
    pub assessment: FacetAssessment,
    #[serde(default)]
    pub decision: Option<RewriteDecision>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub idea_document: IdeaDocument,
    /// Persisted separately, one file per paper.
    #[serde(skip)]
    pub corpus: CorpusStore,
    pub ranking: RelevanceRanking,
    pub clusterings: BTreeMap<FacetType, Vec<FacetCluster>>,
    pub selection: BTreeSet<String>,
    pub assessments: Vec<AssessmentRecord>,
    #[serde(default)]
    pub full_assessment: Option<FullAssessment>,
    /// Drafting prompt per missing facet.
    #[serde(default)]
    pub guidance: BTreeMap<FacetType, String>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl Session {
    pub fn new(session_id: impl Into<String>, idea: &str) -> Self {
        let session_id = session_id.into();
        Session {
            idea_document: IdeaDocument::new(session_id.clone(), idea),
            session_id,
            corpus: CorpusStore::default(),
            ranking: RelevanceRanking::default(),
            clusterings: BTreeMap::new(),
            selection: BTreeSet::new(),
            assessments: Vec::new(),
            full_assessment: None,
            guidance: BTreeMap::new(),
            warnings: Vec::new(),
        }
    }

    pub fn assessment(&self, id: &str) -> Option<&AssessmentRecord> {
        self.assessments.iter().find(|a| a.assessment_id == id)
    }

    /// The most recent assessment of a facet, if any.
    pub fn latest_assessment(&self, facet: FacetType) -> Option<&FacetAssessment> {
        self.assessments.iter().rev().map(|r| &r.assessment).find(|a| a.target.facet_type == facet)
    }
}

/// One line of a session's operation log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub seq: u64,
    pub op: String,
    #[serde(default)]
    pub detail: String,
}

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("idea text is empty")]
    EmptyIdea,
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("session {0} is not ready")]
    NotReady(String),
    #[error("no papers selected")]
    EmptySelection,
    #[error("paper {0} is not in the corpus")]
    UnknownPaper(String),
    #[error("unknown assessment {0}")]
    UnknownAssessment(String),
    #[error("adding papers is disabled in this deployment")]
    AddPaperDisabled,
    #[error("assessment {0} targets no single segment; nothing to rewrite")]
    NoRewriteTarget(String),
    #[error("assessment {0} already has a decision")]
    AlreadyDecided(String),
    #[error("segment {0} changed since it was assessed")]
    Conflict(SegmentId),
    #[error("no current {0} segment to assess")]
    NothingToAssess(FacetType),
    #[error("corrupt session file {path}: {message}")]
    Corrupt { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Facet(#[from] FacetError),
    #[error(transparent)]
    Organizer(#[from] OrganizerError),
    #[error(transparent)]
    Pivot(#[from] PivotError),
    #[error(transparent)]
    Document(#[from] DocumentError),
}
