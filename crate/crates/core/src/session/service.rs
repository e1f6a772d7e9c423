//! Session operations. Each operation loads the session, mutates it, and
//! persists it before returning; operations on one session run one at a time.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::{
    render_report, AssessmentRecord, Phase, Progress, RewriteAction, RewriteDecision, ServiceError, Session, SessionStore,
};
use crate::config::{AppConfig, ConfigError};
use crate::corpus::{AddOutcome, CorpusBuilder, PaperCache};
use crate::document::{content_hash, EditOperation, FacetType, SegmentId, SegmentStatus};
use crate::facets::{detect_missing_facets, extract_corpus, extract_paper_facets, missing_facet_guidance, segment_idea};
use crate::gateway::{Gateway, MockScript};
use crate::organizer::{classify_all, classify_relevance, cluster_by_facet, order_corpus, rank_clusters, rerank, StarOutcome};
use crate::pivot::{detect_affected_facets, AffectedOutcome, AssessmentTarget, Checker, FullAssessment, GraphCache, PivotError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Settings {
    pub extraction_budget: usize,
    pub llm_concurrency: usize,
    pub allow_add_paper: bool,
}

impl Default for Settings {
    fn default() -> Self {
        let c = AppConfig::default();
        Settings {
            extraction_budget: c.extraction_budget,
            llm_concurrency: c.llm_concurrency,
            allow_add_paper: c.allow_add_paper,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssessRequest {
    pub facet: FacetType,
    #[serde(default)]
    pub segment_id: Option<SegmentId>,
    #[serde(default)]
    pub steering: Option<String>,
}

impl AssessRequest {
    pub fn facet(facet: FacetType) -> Self {
        AssessRequest { facet, segment_id: None, steering: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditReport {
    pub doc_version: u64,
    pub removed: Vec<SegmentId>,
    pub touched: Vec<SegmentId>,
    /// Segments flagged stale by the affected-facet check.
    pub flagged: BTreeSet<SegmentId>,
    pub missing: BTreeSet<FacetType>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewriteReport {
    pub assessment_id: String,
    pub decision: RewriteDecision,
    #[serde(default)]
    pub edit: Option<EditReport>,
}

pub struct Service {
    gateway: Arc<Gateway>,
    corpus: CorpusBuilder,
    settings: Settings,
    store: SessionStore,
    graph_cache: GraphCache,
    locks: Mutex<BTreeMap<String, Arc<Mutex<()>>>>,
    progress: Mutex<BTreeMap<String, Progress>>,
    ids: Mutex<()>,
}

impl Service {
    pub fn new(gateway: Arc<Gateway>, corpus: CorpusBuilder, store: SessionStore, settings: Settings) -> Self {
        Service {
            gateway,
            corpus,
            settings,
            store,
            graph_cache: GraphCache::new(),
            locks: Mutex::new(BTreeMap::new()),
            progress: Mutex::new(BTreeMap::new()),
            ids: Mutex::new(()),
        }
    }

    /// Wire a service from configuration: mock or live gateway, backend,
    /// optional paper cache, and the session directory.
    pub fn from_config(config: &AppConfig) -> Result<Service, ServiceError> {
        let cfg_err = |e: ConfigError| ServiceError::Corrupt { path: "config".into(), message: e.to_string() };
        let mut gateway = match &config.mock_script {
            Some(path) => Gateway::mock(
                MockScript::load(path).map_err(|message| ServiceError::Corrupt { path: path.clone(), message })?,
            ),
            None => Gateway::new(config.routing.clone()),
        };
        if let Some(path) = &config.audit_file {
            gateway = gateway.with_audit_file(path).map_err(|source| ServiceError::Io { path: path.clone(), source })?;
        }
        let mut builder = CorpusBuilder::new(config.backend.build().map_err(cfg_err)?, config.corpus.clone());
        if let Some(dir) = &config.cache_dir {
            builder = builder.with_cache(PaperCache::new(dir).map_err(|source| ServiceError::Io { path: dir.clone(), source })?);
        }
        let settings = Settings {
            extraction_budget: config.extraction_budget,
            llm_concurrency: config.llm_concurrency,
            allow_add_paper: config.allow_add_paper,
        };
        Ok(Service::new(Arc::new(gateway), builder, SessionStore::new(&config.data_dir)?, settings))
    }

    pub fn gateway(&self) -> &Gateway {
        &self.gateway
    }

    pub fn store(&self) -> &SessionStore {
        &self.store
    }

    pub fn settings(&self) -> &Settings {
        &self.settings
    }

    fn lock_for(&self, session_id: &str) -> Arc<Mutex<()>> {
        self.locks.lock().expect("lock table poisoned").entry(session_id.to_string()).or_default().clone()
    }

    fn set_progress(&self, session_id: &str, phase: Phase, message: impl Into<String>) {
        let p = Progress::new(phase, message);
        log::info!("{session_id}: {:?} {}", p.phase, p.message);
        self.progress.lock().expect("progress poisoned").insert(session_id.to_string(), p);
    }

    pub fn progress(&self, session_id: &str) -> Result<Progress, ServiceError> {
        if let Some(p) = self.progress.lock().expect("progress poisoned").get(session_id) {
            return Ok(p.clone());
        }
        if self.store.exists(session_id) {
            Ok(Progress::new(Phase::Ready, ""))
        } else {
            Err(ServiceError::UnknownSession(session_id.to_string()))
        }
    }

    /// Run `f` on a loaded session under its lock, then persist and log.
    fn mutate<T>(
        &self,
        session_id: &str,
        op: &str,
        f: impl FnOnce(&mut Session) -> Result<(T, String), ServiceError>,
    ) -> Result<T, ServiceError> {
        let lock = self.lock_for(session_id);
        let _guard = lock.lock().expect("session lock poisoned");
        self.ensure_ready(session_id)?;
        let mut session = self.store.load(session_id)?;
        let (out, detail) = f(&mut session)?;
        self.store.save(&session)?;
        self.store.append_event(session_id, op, &detail)?;
        Ok(out)
    }

    fn ensure_ready(&self, session_id: &str) -> Result<(), ServiceError> {
        match self.progress.lock().expect("progress poisoned").get(session_id) {
            Some(p) if p.phase != Phase::Ready => Err(ServiceError::NotReady(session_id.to_string())),
            _ => Ok(()),
        }
    }

    pub fn get(&self, session_id: &str) -> Result<Session, ServiceError> {
        let lock = self.lock_for(session_id);
        let _guard = lock.lock().expect("session lock poisoned");
        self.ensure_ready(session_id)?;
        self.store.load(session_id)
    }

    /// Allocate a session id and mark the session queued. Ids are a sequence
    /// number plus a prefix of the idea's hash.
    pub fn begin_session(&self, idea: &str) -> Result<String, ServiceError> {
        if idea.trim().is_empty() {
            return Err(ServiceError::EmptyIdea);
        }
        let _g = self.ids.lock().expect("id lock poisoned");
        let n = self.store.list()?.len() + 1;
        let id = format!("s{n:04}-{}", &content_hash(idea)[..8]);
        self.store.reserve(&id)?;
        self.set_progress(&id, Phase::Queued, "");
        Ok(id)
    }

    /// Build the corpus, organize it, and segment the idea for a session
    /// allocated by [`Service::begin_session`].
    pub fn run_creation(&self, session_id: &str, idea: &str) -> Result<Session, ServiceError> {
        let lock = self.lock_for(session_id);
        let _guard = lock.lock().expect("session lock poisoned");
        match self.build_session(session_id, idea) {
            Ok(session) => {
                self.store.save(&session)?;
                self.store.append_event(session_id, "create", &format!("{} papers", session.corpus.len()))?;
                self.set_progress(session_id, Phase::Ready, format!("{} papers", session.corpus.len()));
                Ok(session)
            }
            Err(e) => {
                self.set_progress(session_id, Phase::Failed, e.to_string());
                Err(e)
            }
        }
    }

    pub fn create_session(&self, idea: &str) -> Result<Session, ServiceError> {
        let id = self.begin_session(idea)?;
        self.run_creation(&id, idea)
    }

    fn build_session(&self, session_id: &str, idea: &str) -> Result<Session, ServiceError> {
        let gw: &Gateway = &self.gateway;
        let conc = self.settings.llm_concurrency;
        let budget = self.settings.extraction_budget;
        let mut s = Session::new(session_id, idea);

        self.set_progress(session_id, Phase::RetrievingSeed, "");
        let seed = self.corpus.retrieve_seed(&mut s.corpus, idea)?;
        self.set_progress(session_id, Phase::FetchingPapers, format!("{} seed papers", seed.len()));
        self.corpus.fetch_pending(&mut s.corpus);
        self.set_progress(session_id, Phase::ExtractingFacets, "");
        s.warnings.extend(extract_corpus(gw, &mut s.corpus, budget, conc));

        self.set_progress(session_id, Phase::ExpandingCitations, "");
        let report = self.corpus.expand_citations(&mut s.corpus);
        if !report.failed.is_empty() {
            s.warnings.push(format!("{} cited paper(s) could not be resolved", report.failed.len()));
        }
        self.corpus.fetch_pending(&mut s.corpus);
        s.warnings.extend(extract_corpus(gw, &mut s.corpus, budget, conc));

        self.set_progress(session_id, Phase::ClassifyingRelevance, "");
        s.warnings.extend(classify_all(gw, &mut s.corpus, idea, conc));
        s.ranking = order_corpus(&s.corpus);

        self.set_progress(session_id, Phase::SegmentingIdea, "");
        match segment_idea(gw, idea) {
            Ok(seg) => {
                s.warnings.extend(seg.warnings);
                s.idea_document.set_segments(seg.segments)?;
            }
            Err(e) => s.warnings.push(format!("idea segmentation failed: {e}")),
        }
        s.guidance = missing_facet_guidance(gw, idea, &detect_missing_facets(&s.idea_document));

        self.set_progress(session_id, Phase::Clustering, "");
        for facet in FacetType::ALL {
            match cluster_by_facet(gw, &s.corpus, facet) {
                Ok(mut clusters) => {
                    if !clusters.is_empty() {
                        let text = s.idea_document.facet_text(facet).unwrap_or_else(|| idea.to_string());
                        let star = rank_clusters(gw, facet, &text, &mut clusters)?;
                        s.warnings.extend(star.warnings);
                    }
                    s.clusterings.insert(facet, clusters);
                }
                Err(e) => s.warnings.push(format!("{facet} clustering failed: {e}")),
            }
        }
        Ok(s)
    }

    /// Apply a text edit, then ask which other facets it affects.
    pub fn edit(&self, session_id: &str, edit: &EditOperation) -> Result<EditReport, ServiceError> {
        self.mutate(session_id, "edit", |s| {
            let report = self.apply_edit(s, edit)?;
            Ok((report, format!("{} -> {:?}", edit.range, edit.replacement)))
        })
    }

    fn apply_edit(&self, s: &mut Session, edit: &EditOperation) -> Result<EditReport, ServiceError> {
        let outcome = s.idea_document.apply_edit(edit)?;
        let mut report = EditReport { removed: outcome.removed, touched: outcome.touched.clone(), ..Default::default() };
        // Revising a stale segment resolves it.
        let revived: BTreeSet<SegmentId> = outcome
            .touched
            .iter()
            .filter(|id| s.idea_document.segment(id).is_some_and(|x| x.status == SegmentStatus::Stale))
            .cloned()
            .collect();
        if !revived.is_empty() {
            s.idea_document.flag_segments(&revived, SegmentStatus::Current)?;
        }
        for id in &outcome.touched {
            if s.idea_document.segment(id).is_none() {
                continue;
            }
            let facet = s.idea_document.segment(id).expect("checked").facet_type;
            let latest = s.latest_assessment(facet).cloned();
            let affected: AffectedOutcome = detect_affected_facets(&self.gateway, &mut s.idea_document, id, latest.as_ref())?;
            report.flagged.extend(affected.flagged);
            report.warnings.extend(affected.warnings);
        }
        report.doc_version = s.idea_document.version();
        report.missing = detect_missing_facets(&s.idea_document);
        Ok(report)
    }

    /// Re-run segmentation on the current text.
    pub fn resegment(&self, session_id: &str) -> Result<Session, ServiceError> {
        self.mutate(session_id, "segment", |s| {
            let text = s.idea_document.text().to_string();
            let seg = segment_idea(&self.gateway, &text)?;
            s.warnings.extend(seg.warnings);
            s.idea_document.set_segments(seg.segments)?;
            s.guidance = missing_facet_guidance(&self.gateway, &text, &detect_missing_facets(&s.idea_document));
            Ok((s.clone(), format!("{} segments", s.idea_document.segments().len())))
        })
    }

    pub fn select(&self, session_id: &str, paper_ids: &[String], selected: bool) -> Result<BTreeSet<String>, ServiceError> {
        let op = if selected { "select" } else { "deselect" };
        self.mutate(session_id, op, |s| {
            if let Some(unknown) = paper_ids.iter().find(|id| !s.corpus.contains(id)) {
                return Err(ServiceError::UnknownPaper(unknown.clone()));
            }
            for id in paper_ids {
                if selected {
                    s.selection.insert(id.clone());
                } else {
                    s.selection.remove(id);
                }
            }
            Ok((s.selection.clone(), paper_ids.join(",")))
        })
    }

    /// Add a paper by id when the deployment allows it. The paper is
    /// extracted and classified; clusters are left for the next rerank.
    pub fn add_paper(&self, session_id: &str, paper_id: &str) -> Result<AddOutcome, ServiceError> {
        if !self.settings.allow_add_paper {
            return Err(ServiceError::AddPaperDisabled);
        }
        self.mutate(session_id, "add_paper", |s| {
            let outcome = self.corpus.add_paper(&mut s.corpus, paper_id)?;
            if outcome == AddOutcome::Added {
                let idea = s.idea_document.text().to_string();
                let paper = s.corpus.papers.get_mut(paper_id).expect("just added");
                let report = extract_paper_facets(&self.gateway, paper, self.settings.extraction_budget);
                s.warnings.extend(report.warnings);
                let paper = &s.corpus.papers[paper_id];
                match classify_relevance(&self.gateway, paper, &idea) {
                    Ok(c) => s.corpus.papers.get_mut(paper_id).expect("present").relevance = Some(c),
                    Err(e) => s.warnings.push(format!("{paper_id}: relevance unset: {e}")),
                }
                s.ranking = order_corpus(&s.corpus);
            }
            Ok((outcome, paper_id.to_string()))
        })
    }

    /// Star the clusters of `facet` most useful for the current facet text.
    pub fn rank_clusters(&self, session_id: &str, facet: FacetType) -> Result<StarOutcome, ServiceError> {
        self.mutate(session_id, "rank_clusters", |s| {
            let text = s.idea_document.facet_text(facet).unwrap_or_else(|| s.idea_document.text().to_string());
            let clusters = s.clusterings.entry(facet).or_default();
            let out = rank_clusters(&self.gateway, facet, &text, clusters)?;
            Ok((out, facet.to_string()))
        })
    }

    /// Reclassify and recluster against the current idea text.
    pub fn rerank(&self, session_id: &str) -> Result<Vec<String>, ServiceError> {
        self.mutate(session_id, "rerank", |s| {
            let idea = s.idea_document.text().to_string();
            let texts: BTreeMap<FacetType, String> =
                FacetType::ALL.into_iter().filter_map(|f| s.idea_document.facet_text(f).map(|t| (f, t))).collect();
            let out = rerank(&self.gateway, &mut s.corpus, &idea, &texts, self.settings.llm_concurrency);
            s.ranking = out.ranking;
            for (facet, clusters) in out.clusterings {
                s.clusterings.insert(facet, clusters);
            }
            let mut notes = out.failures;
            notes.extend(out.warnings);
            s.warnings.extend(notes.iter().cloned());
            Ok((notes, String::new()))
        })
    }

    fn checker<'a>(&'a self, steering: Option<String>) -> Checker<'a> {
        Checker::new(&self.gateway).with_graph_cache(&self.graph_cache).with_steering(steering)
    }

    /// Assess one facet against the selected papers.
    pub fn run_assessment(&self, session_id: &str, req: &AssessRequest) -> Result<AssessmentRecord, ServiceError> {
        self.mutate(session_id, "assess", |s| {
            if s.selection.is_empty() {
                return Err(ServiceError::EmptySelection);
            }
            let papers: Vec<_> = s.selection.iter().filter_map(|id| s.corpus.get(id)).collect();
            let doc = &s.idea_document;
            let checker = self.checker(req.steering.clone());
            let assessment = match &req.segment_id {
                Some(id) => {
                    let seg = doc.segment(id).ok_or_else(|| PivotError::UnknownSegment(id.clone()))?;
                    if seg.facet_type != req.facet {
                        return Err(PivotError::WrongFacet(id.clone(), req.facet).into());
                    }
                    checker.assess_segment(doc, id, &papers)?
                }
                None => {
                    let segs: Vec<_> = doc.segments().iter().filter(|x| x.facet_type == req.facet).collect();
                    match segs.as_slice() {
                        [] => return Err(ServiceError::NothingToAssess(req.facet)),
                        [one] => checker.assess_segment(doc, &one.segment_id, &papers)?,
                        _ => {
                            let text = doc.facet_text(req.facet).unwrap_or_default();
                            checker.assess_text(doc, AssessmentTarget::facet(req.facet), &text, &papers)?
                        }
                    }
                }
            };
            let record = AssessmentRecord {
                assessment_id: format!("a{}", s.assessments.len() + 1),
                doc_version: doc.version(),
                assessment,
                decision: None,
            };
            s.assessments.push(record.clone());
            let detail = format!("{} {}", record.assessment_id, req.facet);
            Ok((record, detail))
        })
    }

    /// Assess every current segment; each becomes an assessment record.
    pub fn full_assessment(&self, session_id: &str, steering: Option<String>) -> Result<FullAssessment, ServiceError> {
        self.mutate(session_id, "full_assessment", |s| {
            if s.selection.is_empty() {
                return Err(ServiceError::EmptySelection);
            }
            let papers: Vec<_> = s.selection.iter().filter_map(|id| s.corpus.get(id)).collect();
            let full = self.checker(steering).full_assessment(&s.idea_document, &papers)?;
            let version = s.idea_document.version();
            for a in &full.assessments {
                let record = AssessmentRecord {
                    assessment_id: format!("a{}", s.assessments.len() + 1),
                    doc_version: version,
                    assessment: a.clone(),
                    decision: None,
                };
                s.assessments.push(record);
            }
            s.guidance = full.guidance.clone();
            s.full_assessment = Some(full.clone());
            Ok((full, String::new()))
        })
    }

    /// Accept, edit-then-accept, or reject an assessment's suggested rewrite.
    /// Accepting replaces the assessed segment, which must be unchanged since
    /// the assessment.
    pub fn rewrite(&self, session_id: &str, assessment_id: &str, action: RewriteAction) -> Result<RewriteReport, ServiceError> {
        self.mutate(session_id, "rewrite", |s| {
            let record = s.assessment(assessment_id).ok_or_else(|| ServiceError::UnknownAssessment(assessment_id.into()))?;
            if record.decision.is_some() {
                return Err(ServiceError::AlreadyDecided(assessment_id.into()));
            }
            let target = record.assessment.target.clone();
            let suggested = record.assessment.suggested_rewrite.clone();
            let text = match &action {
                RewriteAction::Reject => None,
                RewriteAction::Accept => Some(suggested),
                RewriteAction::EditThenAccept { text } => Some(text.clone()),
            };
            let mut edit_report = None;
            if let Some(text) = &text {
                let id = target.segment_id.clone().ok_or_else(|| ServiceError::NoRewriteTarget(assessment_id.into()))?;
                let seg = s.idea_document.segment(&id).ok_or_else(|| ServiceError::Conflict(id.clone()))?;
                if Some(&seg.content_hash) != target.segment_hash.as_ref() {
                    return Err(ServiceError::Conflict(id));
                }
                let range = seg.range;
                edit_report = Some(self.apply_edit(s, &EditOperation::new(range, text.clone()))?);
            }
            let decision = RewriteDecision { action, applied_text: text, doc_version: s.idea_document.version() };
            let rec = s.assessments.iter_mut().find(|r| r.assessment_id == assessment_id).expect("found above");
            rec.decision = Some(decision.clone());
            let detail = format!("{assessment_id} {:?}", decision.action);
            Ok((RewriteReport { assessment_id: assessment_id.to_string(), decision, edit: edit_report }, detail))
        })
    }

    /// Render the session report and write it to `report.md` in the session
    /// directory.
    pub fn export_report(&self, session_id: &str) -> Result<String, ServiceError> {
        let session = self.get(session_id)?;
        let report = render_report(&session);
        let path = self.store.dir(session_id).join("report.md");
        std::fs::write(&path, &report).map_err(|source| ServiceError::Io { path, source })?;
        Ok(report)
    }
}
