//! Facet checkers, evidence grounding, full assessment, and affected-facet
//! detection.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::graph::{classify_novelty, build_graph, link_proposed, ContributionLimitationGraph, GraphCache, NoveltyVerdict, ProposedLinks};
use super::PivotError;
use crate::corpus::PaperRecord;
use crate::document::{FacetType, IdeaDocument, SegmentId, SegmentStatus};
use crate::facets::{detect_missing_facets, missing_facet_guidance, FacetFamily};
use crate::gateway::schema::{AffectedResponse, CheckResponse, FindingDraft, SummaryResponse};
use crate::gateway::{Gateway, TaskRequest, TemplateId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssessmentTarget {
    pub facet_type: FacetType,
    #[serde(default)]
    pub segment_id: Option<SegmentId>,
    /// Hash of the segment text the assessment was computed against.
    #[serde(default)]
    pub segment_hash: Option<String>,
}

impl AssessmentTarget {
    pub fn facet(facet_type: FacetType) -> Self {
        AssessmentTarget { facet_type, segment_id: None, segment_hash: None }
    }

    pub fn segment(doc: &IdeaDocument, id: &SegmentId) -> Result<Self, PivotError> {
        let seg = doc.segment(id).ok_or_else(|| PivotError::UnknownSegment(id.clone()))?;
        Ok(AssessmentTarget {
            facet_type: seg.facet_type,
            segment_id: Some(id.clone()),
            segment_hash: Some(seg.content_hash.clone()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceSource {
    pub paper_id: String,
    pub section: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub claim: String,
    pub evidence_snippet: String,
    pub source: EvidenceSource,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewriteElement {
    pub name: String,
    pub present: bool,
    #[serde(default)]
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FacetAssessment {
    pub target: AssessmentTarget,
    pub selected_papers: BTreeSet<String>,
    pub findings: Vec<Finding>,
    /// At least one finding survived evidence validation.
    pub grounded: bool,
    pub verdict_summary: String,
    pub suggested_rewrite: String,
    pub rewrite_elements: Vec<RewriteElement>,
    #[serde(default)]
    pub novelty: Option<NoveltyVerdict>,
    #[serde(default)]
    pub graph: Option<ContributionLimitationGraph>,
    #[serde(default)]
    pub links: Option<ProposedLinks>,
    #[serde(default)]
    pub steering: Option<String>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

/// Collapse whitespace runs to one space and trim.
pub fn normalize_ws(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// The section of `paper` containing `snippet` (whitespace-insensitive), if
/// any. A matching `hint` section is preferred.
pub fn locate_evidence(paper: &PaperRecord, snippet: &str, hint: Option<&str>) -> Option<String> {
    let needle = normalize_ws(snippet);
    if needle.is_empty() {
        return None;
    }
    let passages: Vec<(&str, String)> = paper.passages().map(|(l, t)| (l, normalize_ws(t))).collect();
    if let Some(h) = hint {
        if let Some((label, _)) = passages.iter().find(|(l, t)| *l == h && t.contains(&needle)) {
            return Some(label.to_string());
        }
    }
    passages.into_iter().find(|(_, t)| t.contains(&needle)).map(|(l, _)| l.to_string())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    pub draft: FindingDraft,
    pub reason: String,
}

/// Split drafted findings into those whose snippet occurs verbatim in the
/// cited selected paper and those that do not.
pub fn validate_findings(drafts: &[FindingDraft], papers: &[&PaperRecord]) -> (Vec<Finding>, Vec<Rejection>) {
    let mut valid = Vec::new();
    let mut rejected = Vec::new();
    for d in drafts {
        let pid = d.paper_id.trim();
        let Some(paper) = papers.iter().find(|p| p.paper_id == pid) else {
            rejected.push(Rejection { draft: d.clone(), reason: format!("paper {pid} is not in the selection") });
            continue;
        };
        match locate_evidence(paper, &d.evidence, d.section.as_deref()) {
            Some(section) => valid.push(Finding {
                claim: d.claim.trim().to_string(),
                evidence_snippet: d.evidence.trim().to_string(),
                source: EvidenceSource { paper_id: pid.to_string(), section },
            }),
            None => rejected.push(Rejection {
                draft: d.clone(),
                reason: format!("snippet not found in paper {pid}"),
            }),
        }
    }
    (valid, rejected)
}

fn revision_note(rejected: &[Rejection]) -> String {
    let mut out = String::from(
        "Revision required: these evidence snippets were not found verbatim in the cited papers. \
         Replace each with a snippet copied exactly from the paper text, or drop the finding.\n",
    );
    for r in rejected {
        out.push_str(&format!("- [{}] {:?}: {}\n", r.draft.paper_id, r.draft.evidence, r.reason));
    }
    out
}

fn finding_key(f: &Finding) -> (String, String) {
    (f.source.paper_id.clone(), normalize_ws(&f.evidence_snippet))
}

struct Checked {
    response: CheckResponse,
    findings: Vec<Finding>,
    warnings: Vec<String>,
}

fn paper_statements(papers: &[&PaperRecord], family: FacetFamily) -> String {
    let lines: Vec<String> = papers
        .iter()
        .flat_map(|p| {
            p.facets
                .get(family)
                .iter()
                .map(move |s| format!("- [{}] ({}) {}", p.paper_id, s.source_section, s.statement))
        })
        .collect();
    if lines.is_empty() {
        "(none extracted)".to_string()
    } else {
        lines.join("\n")
    }
}

fn paper_text(papers: &[&PaperRecord]) -> String {
    papers
        .iter()
        .map(|p| {
            let body: Vec<String> = p.passages().map(|(l, t)| format!("## {l}\n{t}")).collect();
            format!("=== Paper {} ===\n{}", p.paper_id, body.join("\n\n"))
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

fn sorted_papers<'p>(papers: &[&'p PaperRecord]) -> Vec<&'p PaperRecord> {
    let mut v = papers.to_vec();
    v.sort_by(|a, b| a.paper_id.cmp(&b.paper_id));
    v.dedup_by(|a, b| a.paper_id == b.paper_id);
    v
}

fn elements(resp: &CheckResponse, names: &[&str]) -> Vec<RewriteElement> {
    names
        .iter()
        .map(|n| {
            let detail = resp.elements.get(*n).map(|s| s.trim().to_string()).unwrap_or_default();
            RewriteElement { name: n.to_string(), present: !detail.is_empty(), detail }
        })
        .collect()
}

/// Runs the facet checkers for one gateway, optional graph cache, and
/// optional researcher steering.
pub struct Checker<'a> {
    gateway: &'a Gateway,
    graph_cache: Option<&'a GraphCache>,
    steering: Option<String>,
}

impl<'a> Checker<'a> {
    pub fn new(gateway: &'a Gateway) -> Self {
        Checker { gateway, graph_cache: None, steering: None }
    }

    pub fn with_graph_cache(mut self, cache: &'a GraphCache) -> Self {
        self.graph_cache = Some(cache);
        self
    }

    pub fn with_steering(mut self, steering: Option<String>) -> Self {
        self.steering = steering.filter(|s| !s.trim().is_empty());
        self
    }

    fn steering_var(&self) -> String {
        match &self.steering {
            Some(s) => format!("Researcher guidance: {s}"),
            None => String::new(),
        }
    }

    /// One checker call, then at most one re-request when findings fail
    /// validation. Valid findings from both rounds are kept; the rest dropped.
    fn check(&self, task: TaskRequest, papers: &[&PaperRecord]) -> Result<Checked, PivotError> {
        let task = task.var("steering", self.steering_var());
        let (response, _) = self.gateway.execute_as::<CheckResponse>(&task.clone().var("revision_note", ""))?;
        let (mut findings, rejected) = validate_findings(&response.findings, papers);
        let mut warnings = Vec::new();
        if !rejected.is_empty() {
            let retry = task.var("revision_note", revision_note(&rejected));
            let dropped = match self.gateway.execute_as::<CheckResponse>(&retry) {
                Ok((second, _)) => {
                    let (valid, still_bad) = validate_findings(&second.findings, papers);
                    let mut seen: BTreeSet<(String, String)> = findings.iter().map(finding_key).collect();
                    for f in valid {
                        if seen.insert(finding_key(&f)) {
                            findings.push(f);
                        }
                    }
                    still_bad.len()
                }
                Err(e) => {
                    warnings.push(format!("evidence re-request failed: {e}"));
                    0
                }
            };
            warnings.push(format!(
                "dropped {} finding(s) with unverifiable evidence{}",
                rejected.len() + dropped,
                if dropped > 0 { " (including after re-request)" } else { "" }
            ));
        }
        Ok(Checked { response, findings, warnings })
    }


    fn base(&self, target: AssessmentTarget, papers: &[&PaperRecord], checked: Checked, names: &[&str]) -> FacetAssessment {
        FacetAssessment {
            target,
            selected_papers: papers.iter().map(|p| p.paper_id.clone()).collect(),
            grounded: !checked.findings.is_empty(),
            rewrite_elements: elements(&checked.response, names),
            findings: checked.findings,
            verdict_summary: checked.response.verdict.trim().to_string(),
            suggested_rewrite: checked.response.rewrite.trim().to_string(),
            novelty: None,
            graph: None,
            links: None,
            steering: self.steering.clone(),
            warnings: checked.warnings,
        }
    }

    pub fn assess_problem(
        &self,
        target: AssessmentTarget,
        facet_text: &str,
        papers: &[&PaperRecord],
    ) -> Result<FacetAssessment, PivotError> {
        let papers = sorted_papers(papers);
        if papers.is_empty() {
            return Err(PivotError::EmptySelection);
        }
        let task = TaskRequest::new(TemplateId::CheckProblem)
            .var("facet_text", facet_text)
            .var("paper_statements", paper_statements(&papers, FacetFamily::Problems))
            .var("paper_text", paper_text(&papers));
        let checked = self.check(task, &papers)?;
        let mut a = self.base(target, &papers, checked, &["problem", "evidence", "significance"]);
        if papers.iter().all(|p| p.facets.problems.is_empty()) {
            a.warnings.push("no problem statements were extracted from the selected papers".into());
        }
        if !a.grounded {
            // Without a verified finding the draft has no citable evidence.
            if let Some(e) = a.rewrite_elements.iter_mut().find(|e| e.name == "evidence") {
                e.present = false;
            }
            a.verdict_summary = format!("No grounding: none of the selected papers supports this problem. {}", a.verdict_summary);
        }
        Ok(a)
    }

    pub fn assess_contribution(
        &self,
        target: AssessmentTarget,
        facet_text: &str,
        problem_text: Option<&str>,
        papers: &[&PaperRecord],
    ) -> Result<FacetAssessment, PivotError> {
        let papers = sorted_papers(papers);
        if papers.is_empty() {
            return Err(PivotError::EmptySelection);
        }
        let built = match self.graph_cache {
            Some(cache) => cache.get_or_build(self.gateway, &papers)?,
            None => build_graph(self.gateway, &papers)?,
        };
        let (links, link_warnings) = link_proposed(self.gateway, &built.graph, facet_text)?;
        let novelty = classify_novelty(&built.graph, &links);
        let linked = if links.linked.is_empty() {
            "(none)".to_string()
        } else {
            links
                .linked
                .iter()
                .filter_map(|id| built.graph.limitation(id))
                .map(|n| {
                    let state = if novelty.addressed_links.contains(&n.node_id) { "addressed" } else { "unaddressed" };
                    format!("- {} [{}; {state}]: {}", n.node_id, n.paper_id, n.statement)
                })
                .collect::<Vec<_>>()
                .join("\n")
        };
        let task = TaskRequest::new(TemplateId::CheckContribution)
            .var("facet_text", facet_text)
            .var("problem_text", problem_text.unwrap_or("(no problem stated)"))
            .var("novelty", novelty.describe())
            .var("linked", linked)
            .var("paper_statements", paper_statements(&papers, FacetFamily::Contributions))
            .var("paper_text", paper_text(&papers));
        let checked = self.check(task, &papers)?;
        let mut a = self.base(target, &papers, checked, &["addresses_problem", "plausibility", "positioning"]);
        let mut warnings = built.warnings.clone();
        warnings.extend(link_warnings);
        warnings.append(&mut a.warnings);
        a.warnings = warnings;
        a.verdict_summary = format!("Novelty: {}. {}", novelty.describe(), a.verdict_summary);
        a.novelty = Some(novelty);
        a.graph = Some(built.graph);
        a.links = Some(links);
        Ok(a)
    }

    /// Requires both a problem and a contribution to evaluate against.
    pub fn assess_evaluation(
        &self,
        target: AssessmentTarget,
        facet_text: &str,
        problem_text: Option<&str>,
        contribution_text: Option<&str>,
        papers: &[&PaperRecord],
    ) -> Result<FacetAssessment, PivotError> {
        let mut missing = BTreeSet::new();
        if problem_text.is_none_or(|t| t.trim().is_empty()) {
            missing.insert(FacetType::Problem);
        }
        if contribution_text.is_none_or(|t| t.trim().is_empty()) {
            missing.insert(FacetType::Contribution);
        }
        if !missing.is_empty() {
            return Err(PivotError::MissingFacets(missing));
        }
        let papers = sorted_papers(papers);
        if papers.is_empty() {
            return Err(PivotError::EmptySelection);
        }
        let task = TaskRequest::new(TemplateId::CheckEvaluation)
            .var("facet_text", facet_text)
            .var("problem_text", problem_text.unwrap_or_default())
            .var("contribution_text", contribution_text.unwrap_or_default())
            .var("paper_statements", paper_statements(&papers, FacetFamily::Evaluations))
            .var("paper_text", paper_text(&papers));
        let checked = self.check(task, &papers)?;
        let mut a = self.base(target, &papers, checked, &["alignment", "feasibility"]);
        if papers.iter().all(|p| p.facets.evaluations.is_empty()) {
            a.warnings.push("no exemplars: the selected papers have no extracted evaluation statements".into());
        }
        Ok(a)
    }

    /// Assess one segment of `doc`, pulling the other facets' text from the
    /// document.
    pub fn assess_segment(
        &self,
        doc: &IdeaDocument,
        segment_id: &SegmentId,
        papers: &[&PaperRecord],
    ) -> Result<FacetAssessment, PivotError> {
        let target = AssessmentTarget::segment(doc, segment_id)?;
        let text = doc.segment_text(segment_id).unwrap_or_default().to_string();
        self.assess_text(doc, target, &text, papers)
    }

    /// Assess the given facet text with `target` as the recorded target.
    pub fn assess_text(
        &self,
        doc: &IdeaDocument,
        target: AssessmentTarget,
        text: &str,
        papers: &[&PaperRecord],
    ) -> Result<FacetAssessment, PivotError> {
        match target.facet_type {
            FacetType::Problem => self.assess_problem(target, text, papers),
            FacetType::Contribution => {
                let problem = doc.facet_text(FacetType::Problem);
                self.assess_contribution(target, text, problem.as_deref(), papers)
            }
            FacetType::Evaluation => {
                let problem = doc.facet_text(FacetType::Problem);
                let contribution = doc.facet_text(FacetType::Contribution);
                self.assess_evaluation(target, text, problem.as_deref(), contribution.as_deref(), papers)
            }
        }
    }

    /// Assess every current segment in document order. A failing segment is
    /// recorded and the rest continue.
    pub fn full_assessment(&self, doc: &IdeaDocument, papers: &[&PaperRecord]) -> Result<FullAssessment, PivotError> {
        if papers.is_empty() {
            return Err(PivotError::EmptySelection);
        }
        let mut out = FullAssessment {
            missing: detect_missing_facets(doc),
            ..Default::default()
        };
        for seg in doc.segments().iter().filter(|s| s.status == SegmentStatus::Current) {
            match self.assess_segment(doc, &seg.segment_id, papers) {
                Ok(a) => out.assessments.push(a),
                Err(e) => out.failures.push(FacetFailure {
                    segment_id: seg.segment_id.clone(),
                    facet_type: seg.facet_type,
                    error: e.to_string(),
                }),
            }
        }
        out.guidance = missing_facet_guidance(self.gateway, doc.text(), &out.missing);
        if out.assessments.is_empty() {
            return Ok(out);
        }
        let summaries = out
            .assessments
            .iter()
            .map(|a| {
                let id = a.target.segment_id.as_ref().map(|s| s.as_str()).unwrap_or("-");
                format!("[{} {id}] grounded={} {}", a.target.facet_type, a.grounded, a.verdict_summary)
            })
            .collect::<Vec<_>>()
            .join("\n");
        let missing: Vec<&str> = out.missing.iter().map(|f| f.as_str()).collect();
        let task = TaskRequest::new(TemplateId::FullAssessment)
            .var("idea", doc.text())
            .var("assessments", summaries)
            .var("missing", if missing.is_empty() { "none".to_string() } else { missing.join(", ") });
        match self.gateway.execute_as::<SummaryResponse>(&task) {
            Ok((summary, _)) => out.summary = Some(summary),
            Err(e) => out.warnings.push(format!("overall summary unavailable: {e}")),
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FacetFailure {
    pub segment_id: SegmentId,
    pub facet_type: FacetType,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FullAssessment {
    pub assessments: Vec<FacetAssessment>,
    pub failures: Vec<FacetFailure>,
    pub missing: BTreeSet<FacetType>,
    /// Drafting prompt per missing facet.
    pub guidance: BTreeMap<FacetType, String>,
    pub summary: Option<SummaryResponse>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AffectedOutcome {
    pub flagged: BTreeSet<SegmentId>,
    pub reasons: BTreeMap<SegmentId, String>,
    pub warnings: Vec<String>,
}

fn analysis_text(latest: Option<&FacetAssessment>) -> String {
    let Some(a) = latest else {
        return "No literature analysis yet.".to_string();
    };
    let mut out = a.verdict_summary.clone();
    for f in &a.findings {
        out.push_str(&format!("\n- {} [{}]", f.claim, f.source.paper_id));
    }
    out
}

/// After an edit to `edited`, ask which other segments now need revision and
/// flag them stale. Fails open: a gateway error flags nothing.
pub fn detect_affected_facets(
    gateway: &Gateway,
    doc: &mut IdeaDocument,
    edited: &SegmentId,
    latest: Option<&FacetAssessment>,
) -> Result<AffectedOutcome, PivotError> {
    if doc.segment(edited).is_none() {
        return Err(PivotError::UnknownSegment(edited.clone()));
    }
    let mut out = AffectedOutcome::default();
    let others: Vec<SegmentId> = doc.segments().iter().map(|s| s.segment_id.clone()).filter(|id| id != edited).collect();
    if others.is_empty() {
        return Ok(out);
    }
    let segments = doc
        .segments()
        .iter()
        .map(|s| {
            let status = match s.status {
                SegmentStatus::Current => "current",
                SegmentStatus::Stale => "stale",
            };
            format!("{} | {} | {status} | {}", s.segment_id, s.facet_type, doc.segment_text(&s.segment_id).unwrap_or_default())
        })
        .collect::<Vec<_>>()
        .join("\n");
    let task = TaskRequest::new(TemplateId::AffectedFacets)
        .var("idea", doc.text())
        .var("segments", segments)
        .var("edited_segment", edited.as_str())
        .var("analysis", analysis_text(latest));
    let resp = match gateway.execute_as::<AffectedResponse>(&task) {
        Ok((resp, _)) => resp,
        Err(e) => {
            out.warnings.push(format!("affected-facet check unavailable: {e}"));
            return Ok(out);
        }
    };
    for a in resp.affected {
        let id = SegmentId::new(a.segment_id.trim());
        if others.contains(&id) {
            out.reasons.entry(id.clone()).or_insert(a.reason);
            out.flagged.insert(id);
        } else {
            out.warnings.push(format!("ignored affected segment {:?}", a.segment_id));
        }
    }
    if !out.flagged.is_empty() {
        doc.flag_segments(&out.flagged, SegmentStatus::Stale)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Provenance;
    use crate::document::{CharRange, EditOperation, SegmentDraft};
    use crate::facets::Statement;
    use crate::gateway::{MockEntry, MockScript};
    use serde_json::json;

    const IDEA: &str = "Plans break under rigid rules. We translate narratives to temporal logic. We count violations.";

    fn planner() -> PaperRecord {
        let mut p = PaperRecord::new("veriplan", Provenance::SeedRetrieval);
        p.title = "Verified planning".into();
        p.sections.insert(
            "introduction".into(),
            "VeriPlan already couples an LLM, a rule translator, and a model checker.\nIt  reports fewer violations.".into(),
        );
        p.facets.contributions = vec![Statement::new("An LLM, a rule translator, and a model checker.", "introduction", vec![])];
        p.facets.limitations = vec![Statement::new("Rules must be written by hand.", "introduction", vec![])];
        p.facets.problems = vec![Statement::new("Plans violate user constraints.", "introduction", vec![])];
        p
    }

    fn doc() -> IdeaDocument {
        let mut d = IdeaDocument::new("d", IDEA);
        d.set_segments(vec![
            SegmentDraft::new(FacetType::Problem, CharRange::new(0, 29)),
            SegmentDraft::new(FacetType::Contribution, CharRange::new(30, 72)),
            SegmentDraft::new(FacetType::Evaluation, CharRange::new(73, 94)),
        ])
        .unwrap();
        d
    }

    fn finding(evidence: &str) -> serde_json::Value {
        json!({"claim": "prior system", "evidence": evidence, "paper_id": "veriplan", "section": "introduction"})
    }

    fn check(template: TemplateId, findings: Vec<serde_json::Value>) -> MockEntry {
        MockEntry::new(template).respond(json!({
            "findings": findings, "verdict": "ok", "rewrite": "better text",
            "elements": {"problem": "p", "evidence": "e", "significance": ""}
        }))
    }

    #[test]
    fn whitespace_differences_still_match() {
        let p = planner();
        assert_eq!(locate_evidence(&p, "model checker. It reports", None).as_deref(), Some("introduction"));
        assert_eq!(locate_evidence(&p, "a theorem prover", None), None);
        assert_eq!(locate_evidence(&p, "   ", None), None);
    }

    #[test]
    fn genuine_snippet_is_kept() {
        let gw = Gateway::mock(MockScript::new().with(check(TemplateId::CheckProblem, vec![finding("It reports fewer violations.")])));
        let p = planner();
        let a = Checker::new(&gw).assess_problem(AssessmentTarget::facet(FacetType::Problem), "x", &[&p]).unwrap();
        assert!(a.grounded);
        assert_eq!(a.findings.len(), 1);
        assert_eq!(gw.audit_len(), 1);
        let present: Vec<bool> = a.rewrite_elements.iter().map(|e| e.present).collect();
        assert_eq!(present, vec![true, true, false]);
    }

    #[test]
    fn fabricated_snippet_is_rerequested_then_dropped() {
        let gw = Gateway::mock(MockScript::new().with(check(
            TemplateId::CheckProblem,
            vec![finding("It reports fewer violations."), finding("VeriPlan proves every plan correct.")],
        )));
        let p = planner();
        let a = Checker::new(&gw).assess_problem(AssessmentTarget::facet(FacetType::Problem), "x", &[&p]).unwrap();
        assert_eq!(a.findings.len(), 1);
        assert_eq!(a.findings[0].evidence_snippet, "It reports fewer violations.");
        assert_eq!(gw.audit_len(), 2);
    }

    #[test]
    fn rerequest_can_supply_a_corrected_snippet() {
        let gw = Gateway::mock(
            MockScript::new()
                .with(check(TemplateId::CheckProblem, vec![finding("VeriPlan proves every plan correct.")]).when_eq("revision_note", ""))
                .with(
                    check(TemplateId::CheckProblem, vec![finding("It reports fewer violations.")])
                        .when_contains("revision_note", "proves every plan correct"),
                ),
        );
        let p = planner();
        let a = Checker::new(&gw).assess_problem(AssessmentTarget::facet(FacetType::Problem), "x", &[&p]).unwrap();
        assert_eq!(a.findings.len(), 1);
        assert_eq!(a.findings[0].evidence_snippet, "It reports fewer violations.");
        assert!(a.grounded);
    }

    #[test]
    fn no_grounding_marks_evidence_missing() {
        let gw = Gateway::mock(MockScript::new().with(check(TemplateId::CheckProblem, vec![])));
        let p = planner();
        let a = Checker::new(&gw).assess_problem(AssessmentTarget::facet(FacetType::Problem), "x", &[&p]).unwrap();
        assert!(!a.grounded);
        assert!(a.verdict_summary.starts_with("No grounding"));
        assert!(!a.rewrite_elements.iter().find(|e| e.name == "evidence").unwrap().present);
    }

    #[test]
    fn empty_selection_rejected() {
        let gw = Gateway::mock(MockScript::new());
        let err = Checker::new(&gw).assess_problem(AssessmentTarget::facet(FacetType::Problem), "x", &[]).unwrap_err();
        assert!(matches!(err, PivotError::EmptySelection));
        assert_eq!(gw.audit_len(), 0);
    }

    #[test]
    fn overlapping_contribution_is_incremental() {
        let gw = Gateway::mock(
            MockScript::new()
                .with(MockEntry::new(TemplateId::BuildGraph).respond(json!({"edges": [{"contribution": "C1", "limitation": "L1"}]})))
                .with(MockEntry::new(TemplateId::LinkContribution).respond(json!({"links": [{"limitation": "L1", "rationale": "same"}]})))
                .with(check(TemplateId::CheckContribution, vec![finding("already couples an LLM, a rule translator, and a model checker")])),
        );
        let p = planner();
        let a = Checker::new(&gw)
            .assess_contribution(AssessmentTarget::facet(FacetType::Contribution), "LLM plus checker", Some("p"), &[&p])
            .unwrap();
        assert_eq!(a.novelty.as_ref().unwrap().verdict, super::super::Novelty::Incremental);
        assert!(a.verdict_summary.starts_with("Novelty: incremental"));
        assert_eq!(a.findings[0].source.paper_id, "veriplan");
    }

    #[test]
    fn evaluation_needs_problem_and_contribution() {
        let gw = Gateway::mock(MockScript::new());
        let p = planner();
        let err = Checker::new(&gw)
            .assess_evaluation(AssessmentTarget::facet(FacetType::Evaluation), "count", None, Some("c"), &[&p])
            .unwrap_err();
        match err {
            PivotError::MissingFacets(m) => assert_eq!(m, BTreeSet::from([FacetType::Problem])),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn evaluation_without_exemplars_warns() {
        let gw = Gateway::mock(MockScript::new().with(check(TemplateId::CheckEvaluation, vec![])));
        let p = planner();
        let a = Checker::new(&gw)
            .assess_evaluation(AssessmentTarget::facet(FacetType::Evaluation), "count", Some("p"), Some("c"), &[&p])
            .unwrap();
        assert!(a.warnings.iter().any(|w| w.contains("no exemplars")));
    }

    #[test]
    fn full_assessment_isolates_failures() {
        let gw = Gateway::mock(
            MockScript::new()
                .with(check(TemplateId::CheckProblem, vec![]))
                .with(MockEntry::new(TemplateId::CheckEvaluation).malformed(3))
                .with(MockEntry::new(TemplateId::FullAssessment).respond(json!({"summary": "fine", "priorities": []}))),
        );
        let p = planner();
        let mut d = doc();
        let contribution = d.segments()[1].segment_id.clone();
        d.flag_segments(&BTreeSet::from([contribution]), SegmentStatus::Stale).unwrap();
        let full = Checker::new(&gw).full_assessment(&d, &[&p]).unwrap();
        assert_eq!(full.assessments.len(), 1);
        assert_eq!(full.failures.len(), 1);
        assert_eq!(full.failures[0].facet_type, FacetType::Evaluation);
        assert_eq!(full.missing, BTreeSet::from([FacetType::Contribution]));
        assert!(full.guidance.contains_key(&FacetType::Contribution));
        assert_eq!(full.summary.unwrap().summary, "fine");
    }

    #[test]
    fn affected_facets_flag_others_only() {
        let mut d = doc();
        let ids: Vec<String> = d.segments().iter().map(|s| s.segment_id.0.clone()).collect();
        let gw = Gateway::mock(MockScript::new().with(MockEntry::new(TemplateId::AffectedFacets).respond(json!({"affected": [
            {"segment_id": ids[2], "reason": "metrics no longer fit"},
            {"segment_id": ids[1], "reason": "self"},
            {"segment_id": "seg-99-9", "reason": "invented"}
        ]}))));
        d.apply_edit(&EditOperation::new(CharRange::new(30, 72), "We learn constraints from examples.")).unwrap();
        let edited = SegmentId::new(ids[1].clone());
        let out = detect_affected_facets(&gw, &mut d, &edited, None).unwrap();
        assert_eq!(out.flagged, BTreeSet::from([SegmentId::new(ids[2].clone())]));
        assert_eq!(d.segment(&SegmentId::new(ids[2].clone())).unwrap().status, SegmentStatus::Stale);
        assert_eq!(d.segment(&edited).unwrap().status, SegmentStatus::Current);
    }

    #[test]
    fn affected_facets_fail_open() {
        let mut d = doc();
        let gw = Gateway::mock(MockScript::new());
        let edited = d.segments()[0].segment_id.clone();
        let version = d.version();
        let out = detect_affected_facets(&gw, &mut d, &edited, None).unwrap();
        assert!(out.flagged.is_empty());
        assert_eq!(out.warnings.len(), 1);
        assert_eq!(d.version(), version);
    }
}
