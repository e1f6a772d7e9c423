//! Facet statements extracted from papers, and facet segmentation of the
//! researcher's own idea.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CorpusStore, PaperRecord};
use crate::document::{char_len, CharRange, FacetType, IdeaDocument, SegmentDraft};
use crate::gateway::schema::{MissingGuidanceResponse, SegmentationResponse, StatementsResponse};
use crate::gateway::{Gateway, GatewayError, TaskRequest, TemplateId};

/// Minimum share of a paraphrased span that must match the idea verbatim.
pub const ANCHOR_MIN_RATIO: f64 = 0.8;

/// Default per-request character budget for paper text.
pub const DEFAULT_EXTRACTION_BUDGET: usize = 60_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FacetFamily {
    Problems,
    Contributions,
    Evaluations,
    Motivations,
    Methods,
    Results,
    Limitations,
    FutureWork,
}

impl FacetFamily {
    pub const ALL: [FacetFamily; 8] = [
        FacetFamily::Problems,
        FacetFamily::Contributions,
        FacetFamily::Evaluations,
        FacetFamily::Motivations,
        FacetFamily::Methods,
        FacetFamily::Results,
        FacetFamily::Limitations,
        FacetFamily::FutureWork,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FacetFamily::Problems => "problems",
            FacetFamily::Contributions => "contributions",
            FacetFamily::Evaluations => "evaluations",
            FacetFamily::Motivations => "motivations",
            FacetFamily::Methods => "methods",
            FacetFamily::Results => "results",
            FacetFamily::Limitations => "limitations",
            FacetFamily::FutureWork => "future_work",
        }
    }

    fn description(self) -> &'static str {
        match self {
            FacetFamily::Problems => "problem statement (a gap, difficulty, or need the paper targets)",
            FacetFamily::Contributions => "contribution (something the paper builds, proposes, or shows)",
            FacetFamily::Evaluations => {
                "evaluation statement (how the paper tests its contributions: datasets, metrics, baselines, studies)"
            }
            FacetFamily::Motivations => "motivation (why the authors consider the work important)",
            FacetFamily::Methods => "method (a technique or procedure the paper uses)",
            FacetFamily::Results => "result (a finding the paper reports)",
            FacetFamily::Limitations => "limitation (a weakness or open gap the authors acknowledge)",
            FacetFamily::FutureWork => "future-work statement (work the authors say remains to be done)",
        }
    }

    /// The statement family that corresponds to an idea facet.
    pub fn for_facet(facet: FacetType) -> FacetFamily {
        match facet {
            FacetType::Problem => FacetFamily::Problems,
            FacetType::Contribution => FacetFamily::Contributions,
            FacetType::Evaluation => FacetFamily::Evaluations,
        }
    }
}

impl fmt::Display for FacetFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Statement {
    pub statement: String,
    pub source_section: String,
    #[serde(default)]
    pub citations: Vec<String>,
}

impl Statement {
    pub fn new(statement: impl Into<String>, section: impl Into<String>, citations: Vec<String>) -> Self {
        Statement { statement: statement.into(), source_section: section.into(), citations }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FacetStatements {
    #[serde(default)]
    pub problems: Vec<Statement>,
    #[serde(default)]
    pub contributions: Vec<Statement>,
    #[serde(default)]
    pub evaluations: Vec<Statement>,
    #[serde(default)]
    pub motivations: Vec<Statement>,
    #[serde(default)]
    pub methods: Vec<Statement>,
    #[serde(default)]
    pub results: Vec<Statement>,
    #[serde(default)]
    pub limitations: Vec<Statement>,
    #[serde(default)]
    pub future_work: Vec<Statement>,
}

impl FacetStatements {
    pub fn get(&self, family: FacetFamily) -> &Vec<Statement> {
        match family {
            FacetFamily::Problems => &self.problems,
            FacetFamily::Contributions => &self.contributions,
            FacetFamily::Evaluations => &self.evaluations,
            FacetFamily::Motivations => &self.motivations,
            FacetFamily::Methods => &self.methods,
            FacetFamily::Results => &self.results,
            FacetFamily::Limitations => &self.limitations,
            FacetFamily::FutureWork => &self.future_work,
        }
    }

    pub fn get_mut(&mut self, family: FacetFamily) -> &mut Vec<Statement> {
        match family {
            FacetFamily::Problems => &mut self.problems,
            FacetFamily::Contributions => &mut self.contributions,
            FacetFamily::Evaluations => &mut self.evaluations,
            FacetFamily::Motivations => &mut self.motivations,
            FacetFamily::Methods => &mut self.methods,
            FacetFamily::Results => &mut self.results,
            FacetFamily::Limitations => &mut self.limitations,
            FacetFamily::FutureWork => &mut self.future_work,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (FacetFamily, &Statement)> {
        FacetFamily::ALL.into_iter().flat_map(move |f| self.get(f).iter().map(move |s| (f, s)))
    }

    pub fn is_empty(&self) -> bool {
        self.iter().next().is_none()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExtractionReport {
    pub warnings: Vec<String>,
    /// Families answered from the cache rather than a model call.
    pub cached: Vec<FacetFamily>,
}

/// Split sections into chunks whose rendered length stays within `budget`.
/// A single oversized section is split on character boundaries.
fn chunk_sections(sections: &[(String, String)], budget: usize) -> Vec<Vec<(String, String)>> {
    let budget = budget.max(1);
    let mut chunks: Vec<Vec<(String, String)>> = Vec::new();
    let mut current: Vec<(String, String)> = Vec::new();
    let mut used = 0;
    for (label, text) in sections {
        let mut pieces: Vec<String> = Vec::new();
        let chars: Vec<char> = text.chars().collect();
        if chars.len() > budget {
            pieces.extend(chars.chunks(budget).map(|c| c.iter().collect()));
        } else {
            pieces.push(text.clone());
        }
        for piece in pieces {
            let n = char_len(&piece);
            if used + n > budget && !current.is_empty() {
                chunks.push(std::mem::take(&mut current));
                used = 0;
            }
            used += n;
            current.push((label.clone(), piece));
        }
    }
    if !current.is_empty() {
        chunks.push(current);
    }
    chunks
}

fn render_sections(sections: &[(String, String)]) -> String {
    sections.iter().map(|(l, t)| format!("## {l}\n{t}")).collect::<Vec<_>>().join("\n\n")
}

/// Resolve a statement's citation markers to paper ids using the paper's
/// reference table. Markers found in the statement text count even when the
/// model omitted them.
pub fn resolve_citations(paper: &PaperRecord, statement: &str, model_citations: &[String]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let known_ids: BTreeSet<&String> = paper.references.values().collect();
    let mut push = |id: &String| {
        if id != &paper.paper_id && !out.contains(id) {
            out.push(id.clone());
        }
    };
    for c in model_citations {
        if let Some(id) = paper.references.get(c.trim()) {
            push(id);
        } else if known_ids.contains(c) {
            push(c);
        }
    }
    for (marker, id) in &paper.references {
        if statement.contains(marker.as_str()) {
            push(id);
        }
    }
    out
}

/// Extract every facet family from one paper. Families already extracted
/// with the current prompt version are skipped. One failing family leaves
/// the others intact.
pub fn extract_paper_facets(gateway: &Gateway, paper: &mut PaperRecord, budget: usize) -> ExtractionReport {
    let mut report = ExtractionReport::default();
    let sections = paper.extraction_sections();
    if sections.is_empty() {
        report.warnings.push(format!("{}: no text to extract facets from", paper.paper_id));
        return report;
    }
    let labels: BTreeSet<String> = sections.iter().map(|(l, _)| l.clone()).collect();
    let chunks = chunk_sections(&sections, budget);
    let version = TemplateId::ExtractFacet.prompt_version();
    for family in FacetFamily::ALL {
        if paper.facet_versions.get(&family) == Some(&version) {
            report.cached.push(family);
            continue;
        }
        let mut statements = Vec::new();
        let mut failed = false;
        for chunk in &chunks {
            let chunk_labels: Vec<&str> = chunk.iter().map(|(l, _)| l.as_str()).collect();
            let task = TaskRequest::new(TemplateId::ExtractFacet)
                .var("family", family.as_str())
                .var("family_description", family.description())
                .var("paper_id", paper.paper_id.clone())
                .var("title", paper.title.clone())
                .var("section_labels", chunk_labels.join(", "))
                .var("paper_text", render_sections(chunk));
            match gateway.execute_as::<StatementsResponse>(&task) {
                Ok((resp, _)) => {
                    for s in resp.statements {
                        let label = labels
                            .iter()
                            .find(|l| l.eq_ignore_ascii_case(s.section.trim()))
                            .cloned();
                        let Some(label) = label else {
                            report.warnings.push(format!(
                                "{}: dropped {family} statement citing unknown section `{}`",
                                paper.paper_id, s.section
                            ));
                            continue;
                        };
                        let citations = resolve_citations(paper, &s.statement, &s.citations);
                        statements.push(Statement::new(s.statement.trim(), label, citations));
                    }
                }
                Err(e) => {
                    report.warnings.push(format!("{}: {family} extraction failed: {e}", paper.paper_id));
                    failed = true;
                    break;
                }
            }
        }
        if failed {
            paper.facets.get_mut(family).clear();
            paper.facet_versions.remove(&family);
        } else {
            *paper.facets.get_mut(family) = statements;
            paper.facet_versions.insert(family, version.clone());
        }
    }
    report
}

/// Extract facets for every paper in the store, `concurrency` papers at a time.
pub fn extract_corpus(gateway: &Gateway, store: &mut CorpusStore, budget: usize, concurrency: usize) -> Vec<String> {
    let ids: Vec<String> = store.papers.keys().cloned().collect();
    let mut warnings = Vec::new();
    for chunk in ids.chunks(concurrency.max(1)) {
        let work: Vec<PaperRecord> = chunk.iter().map(|id| store.papers[id].clone()).collect();
        let done: Vec<(PaperRecord, ExtractionReport)> = std::thread::scope(|scope| {
            let handles: Vec<_> = work
                .into_iter()
                .map(|mut p| {
                    scope.spawn(move || {
                        let r = extract_paper_facets(gateway, &mut p, budget);
                        (p, r)
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("extraction worker panicked")).collect()
        });
        for (paper, report) in done {
            warnings.extend(report.warnings);
            store.papers.insert(paper.paper_id.clone(), paper);
        }
    }
    warnings
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentationResult {
    pub segments: Vec<SegmentDraft>,
    pub missing: BTreeSet<FacetType>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FacetError {
    #[error("idea text is empty")]
    EmptyIdea,
    #[error("segmentation failed: {0}")]
    Gateway(#[from] GatewayError),
    #[error("no segment returned by the model could be located in the idea")]
    NothingLocated,
}

/// Longest common substring of `needle` and `hay` in characters, as
/// (start in hay, length).
fn longest_common_substring(needle: &[char], hay: &[char]) -> (usize, usize) {
    let mut best = (0, 0);
    let mut prev = vec![0usize; needle.len() + 1];
    let mut cur = vec![0usize; needle.len() + 1];
    for (j, hc) in hay.iter().enumerate() {
        for (i, nc) in needle.iter().enumerate() {
            cur[i + 1] = if nc == hc { prev[i] + 1 } else { 0 };
            if cur[i + 1] > best.1 {
                best = (j + 1 - cur[i + 1], cur[i + 1]);
            }
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    best
}

fn find_chars(hay: &[char], needle: &[char], from: usize) -> Option<usize> {
    if needle.is_empty() || needle.len() > hay.len() {
        return None;
    }
    (from..=hay.len() - needle.len()).find(|&i| hay[i..i + needle.len()] == *needle)
}

/// Locate a model-returned span in the idea. Exact matches win, preferring an
/// occurrence not already claimed; otherwise a verbatim core covering at
/// least [`ANCHOR_MIN_RATIO`] of the span.
pub fn anchor_span(idea: &str, span: &str, claimed: &[CharRange]) -> Option<CharRange> {
    let hay: Vec<char> = idea.chars().collect();
    let needle: Vec<char> = span.trim().chars().collect();
    if needle.is_empty() {
        return None;
    }
    let mut first = None;
    let mut from = 0;
    while let Some(at) = find_chars(&hay, &needle, from) {
        let r = CharRange::new(at, at + needle.len());
        if !claimed.iter().any(|c| c.overlaps(&r)) {
            return Some(r);
        }
        first.get_or_insert(r);
        from = at + 1;
    }
    if first.is_some() {
        return first;
    }
    let (start, len) = longest_common_substring(&needle, &hay);
    if len as f64 / needle.len() as f64 >= ANCHOR_MIN_RATIO {
        Some(CharRange::new(start, start + len))
    } else {
        None
    }
}

/// Normalize located spans: sort, keep the earlier of two overlapping spans,
/// truncate the later one, drop anything left empty.
pub fn normalize_spans(mut spans: Vec<(FacetType, CharRange)>, warnings: &mut Vec<String>) -> Vec<SegmentDraft> {
    spans.sort_by_key(|(f, r)| (r.start, r.end, *f));
    let mut out: Vec<SegmentDraft> = Vec::new();
    let mut frontier = 0;
    for (facet, mut range) in spans {
        if range.start < frontier {
            range.start = frontier;
        }
        if range.is_empty() {
            warnings.push(format!("{facet} span overlapped an earlier span entirely and was dropped"));
            continue;
        }
        frontier = range.end;
        out.push(SegmentDraft::new(facet, range));
    }
    out
}

fn missing_from(present: impl IntoIterator<Item = FacetType>) -> BTreeSet<FacetType> {
    let present: BTreeSet<FacetType> = present.into_iter().collect();
    FacetType::ALL.into_iter().filter(|f| !present.contains(f)).collect()
}

pub fn segment_idea(gateway: &Gateway, idea_text: &str) -> Result<SegmentationResult, FacetError> {
    if idea_text.trim().is_empty() {
        return Err(FacetError::EmptyIdea);
    }
    let task = TaskRequest::new(TemplateId::SegmentIdea).var("idea", idea_text);
    let (resp, _) = gateway.execute_as::<SegmentationResponse>(&task)?;
    let mut warnings = Vec::new();
    let mut located: Vec<(FacetType, CharRange)> = Vec::new();
    for span in &resp.segments {
        let claimed: Vec<CharRange> = located.iter().map(|(_, r)| *r).collect();
        match anchor_span(idea_text, &span.text, &claimed) {
            Some(r) => located.push((span.facet, r)),
            None => warnings.push(format!("{} span not found in the idea and dropped: {:?}", span.facet, span.text)),
        }
    }
    if located.is_empty() && !resp.segments.is_empty() {
        return Err(FacetError::NothingLocated);
    }
    let segments = normalize_spans(located, &mut warnings);
    let missing = missing_from(segments.iter().map(|s| s.facet_type));
    Ok(SegmentationResult { segments, missing, warnings })
}

/// Facet types with no current segment.
pub fn detect_missing_facets(doc: &IdeaDocument) -> BTreeSet<FacetType> {
    missing_from(doc.segments().iter().filter(|s| s.status == crate::document::SegmentStatus::Current).map(|s| s.facet_type))
}

fn fallback_guidance(facet: FacetType) -> String {
    match facet {
        FacetType::Problem => "What problem does this idea address, and what evidence shows it is real?".into(),
        FacetType::Contribution => "What will you build, study, or show to address the problem?".into(),
        FacetType::Evaluation => "How will you test whether the contribution addresses the problem?".into(),
    }
}

/// A drafting prompt for each missing facet. Falls back to fixed questions
/// when the model call fails.
pub fn missing_facet_guidance(
    gateway: &Gateway,
    idea_text: &str,
    missing: &BTreeSet<FacetType>,
) -> BTreeMap<FacetType, String> {
    if missing.is_empty() {
        return BTreeMap::new();
    }
    let names: Vec<&str> = missing.iter().map(|f| f.as_str()).collect();
    let task = TaskRequest::new(TemplateId::MissingFacets).var("idea", idea_text).var("missing", names.join(", "));
    let mut out: BTreeMap<FacetType, String> = BTreeMap::new();
    match gateway.execute_as::<MissingGuidanceResponse>(&task) {
        Ok((resp, _)) => {
            for g in resp.guidance {
                if missing.contains(&g.facet) && !g.prompt.trim().is_empty() {
                    out.entry(g.facet).or_insert(g.prompt);
                }
            }
        }
        Err(e) => log::warn!("missing-facet guidance unavailable: {e}"),
    }
    for f in missing {
        out.entry(*f).or_insert_with(|| fallback_guidance(*f));
    }
    out
}
