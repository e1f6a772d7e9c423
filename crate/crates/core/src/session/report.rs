//! Markdown report for a session. Output depends only on session state, so
//! identical sessions render byte-identical reports.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use super::{AssessmentRecord, RewriteAction, Session};
use crate::corpus::{FetchStatus, Provenance};
use crate::document::{FacetType, SegmentStatus};
use crate::facets::detect_missing_facets;
use crate::pivot::FacetAssessment;

fn one_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn provenance(p: Provenance) -> &'static str {
    match p {
        Provenance::SeedRetrieval => "seed",
        Provenance::CitationExpansion => "citation expansion",
        Provenance::UserAdded => "user added",
    }
}

fn fetch(f: FetchStatus) -> &'static str {
    match f {
        FetchStatus::FullText => "full text",
        FetchStatus::AbstractOnly => "abstract only",
        FetchStatus::MetadataOnly => "metadata only",
    }
}

fn write_assessment(out: &mut String, record: &AssessmentRecord) {
    let a: &FacetAssessment = &record.assessment;
    let target = a.target.segment_id.as_ref().map(|s| s.as_str()).unwrap_or("whole facet");
    let _ = writeln!(out, "### {} ({}) [{}]\n", a.target.facet_type, target, record.assessment_id);
    let _ = writeln!(out, "- Document version: {}", record.doc_version);
    let papers: Vec<&str> = a.selected_papers.iter().map(String::as_str).collect();
    let _ = writeln!(out, "- Selected papers: {}", papers.join(", "));
    let _ = writeln!(out, "- Grounded: {}", if a.grounded { "yes" } else { "no" });
    if let Some(s) = &a.steering {
        let _ = writeln!(out, "- Steering: {}", one_line(s));
    }
    if let Some(n) = &a.novelty {
        if let (Some(links), Some(graph)) = (&a.links, &a.graph) {
            if !links.linked.is_empty() {
                let _ = writeln!(out, "- Linked limitations:");
            }
            for id in &links.linked {
                if let Some(node) = graph.limitation(id) {
                    let state = if n.addressed_links.contains(id) { "addressed" } else { "unaddressed" };
                    let _ = writeln!(out, "  - {id} ({state}, {}): {}", node.paper_id, one_line(&node.statement));
                }
            }
        }
    }
    let _ = writeln!(out, "\n{}\n", one_line(&a.verdict_summary));
    if !a.findings.is_empty() {
        let _ = writeln!(out, "Findings:\n");
        for (i, f) in a.findings.iter().enumerate() {
            let _ = writeln!(
                out,
                "{}. {}: \"{}\" [{}, {}]",
                i + 1,
                one_line(&f.claim),
                one_line(&f.evidence_snippet),
                f.source.paper_id,
                f.source.section
            );
        }
        out.push('\n');
    }
    let _ = writeln!(out, "Suggested rewrite:\n\n> {}\n", one_line(&a.suggested_rewrite));
    let _ = writeln!(out, "Rewrite checklist:\n");
    for e in &a.rewrite_elements {
        let _ = writeln!(out, "- [{}] {}", if e.present { "x" } else { " " }, e.name);
    }
    out.push('\n');
    if let Some(d) = &record.decision {
        let action = match d.action {
            RewriteAction::Accept => "accepted",
            RewriteAction::EditThenAccept { .. } => "edited then accepted",
            RewriteAction::Reject => "rejected",
        };
        let _ = writeln!(out, "Decision: {action} (document version {})\n", d.doc_version);
    }
    if !a.warnings.is_empty() {
        let _ = writeln!(out, "Warnings:\n");
        for w in &a.warnings {
            let _ = writeln!(out, "- {}", one_line(w));
        }
        out.push('\n');
    }
}

pub fn render_report(s: &Session) -> String {
    let doc = &s.idea_document;
    let mut out = String::new();
    let _ = writeln!(out, "# Idea assessment report\n");
    let _ = writeln!(out, "Session: {}  \nDocument version: {}\n", s.session_id, doc.version());
    let _ = writeln!(out, "## Idea\n\n{}\n", doc.text().trim());

    let _ = writeln!(out, "## Facets\n");
    if doc.segments().is_empty() {
        let _ = writeln!(out, "No facets identified.\n");
    } else {
        let _ = writeln!(out, "| Segment | Facet | Status | Text |\n|---|---|---|---|");
        for seg in doc.segments() {
            let status = if seg.status == SegmentStatus::Current { "current" } else { "stale" };
            let text = one_line(doc.segment_text(&seg.segment_id).unwrap_or_default()).replace('|', "\\|");
            let _ = writeln!(out, "| {} | {} | {} | {} |", seg.segment_id, seg.facet_type, status, text);
        }
        out.push('\n');
    }
    let missing = detect_missing_facets(doc);
    if !missing.is_empty() {
        let _ = writeln!(out, "Missing facets:\n");
        for f in &missing {
            match s.guidance.get(f) {
                Some(g) => {
                    let _ = writeln!(out, "- {f}: {}", one_line(g));
                }
                None => {
                    let _ = writeln!(out, "- {f}");
                }
            }
        }
        out.push('\n');
    }

    let _ = writeln!(out, "## Assessments\n");
    if s.assessments.is_empty() {
        let _ = writeln!(out, "No assessments yet.\n");
    }
    for record in &s.assessments {
        write_assessment(&mut out, record);
    }

    if let Some(full) = &s.full_assessment {
        let _ = writeln!(out, "## Overall assessment\n");
        match &full.summary {
            Some(summary) => {
                let _ = writeln!(out, "{}\n", one_line(&summary.summary));
                for (i, p) in summary.priorities.iter().enumerate() {
                    let _ = writeln!(out, "{}. {}", i + 1, one_line(p));
                }
                if !summary.priorities.is_empty() {
                    out.push('\n');
                }
            }
            None => {
                let _ = writeln!(out, "No overall summary available.\n");
            }
        }
        for f in &full.failures {
            let _ = writeln!(out, "- {} ({}) could not be assessed: {}", f.facet_type, f.segment_id, one_line(&f.error));
        }
        if !full.failures.is_empty() {
            out.push('\n');
        }
    }

    let cited: BTreeSet<&str> = s
        .assessments
        .iter()
        .flat_map(|r| r.assessment.findings.iter().map(|f| f.source.paper_id.as_str()))
        .collect();
    let _ = writeln!(out, "## Cited papers\n");
    if cited.is_empty() {
        let _ = writeln!(out, "None.\n");
    } else {
        let _ = writeln!(out, "| Paper | Title | Relevance | Source | Content |\n|---|---|---|---|---|");
        for id in &cited {
            match s.corpus.get(id) {
                Some(p) => {
                    let rel = p.relevance.map(|r| r.as_str()).unwrap_or("unclassified");
                    let _ = writeln!(
                        out,
                        "| {id} | {} | {rel} | {} | {} |",
                        one_line(&p.title).replace('|', "\\|"),
                        provenance(p.provenance()),
                        fetch(p.fetch_status)
                    );
                }
                None => {
                    let _ = writeln!(out, "| {id} | (not in corpus) | | | |");
                }
            }
        }
        out.push('\n');
    }

    let _ = writeln!(out, "## Corpus\n");
    let mut by_source: BTreeMap<&str, usize> = BTreeMap::new();
    let mut by_fetch: BTreeMap<&str, usize> = BTreeMap::new();
    for p in s.corpus.papers.values() {
        *by_source.entry(provenance(p.provenance())).or_default() += 1;
        *by_fetch.entry(fetch(p.fetch_status)).or_default() += 1;
    }
    let fmt_counts = |m: &BTreeMap<&str, usize>| m.iter().map(|(k, v)| format!("{k} {v}")).collect::<Vec<_>>().join(", ");
    let _ = writeln!(out, "- Papers: {}", s.corpus.len());
    if !by_source.is_empty() {
        let _ = writeln!(out, "- By source: {}", fmt_counts(&by_source));
        let _ = writeln!(out, "- By content: {}", fmt_counts(&by_fetch));
    }
    let mut by_rel: BTreeMap<&str, usize> = BTreeMap::new();
    for e in &s.ranking.entries {
        *by_rel.entry(e.category.as_str()).or_default() += 1;
    }
    if !by_rel.is_empty() {
        let _ = writeln!(out, "- By relevance: {}", fmt_counts(&by_rel));
    }
    let selection: Vec<&str> = s.selection.iter().map(String::as_str).collect();
    let _ = writeln!(out, "- Selected: {}", if selection.is_empty() { "none".to_string() } else { selection.join(", ") });
    for facet in FacetType::ALL {
        if let Some(clusters) = s.clusterings.get(&facet) {
            if clusters.is_empty() {
                continue;
            }
            let names: Vec<String> = clusters
                .iter()
                .map(|c| format!("{}{} ({})", if c.starred { "★ " } else { "" }, c.label, c.members.len()))
                .collect();
            let _ = writeln!(out, "- {facet} clusters: {}", names.join("; "));
        }
    }
    if !s.corpus.expansion_failures.is_empty() {
        let _ = writeln!(out, "- Unresolved citations:");
        for f in &s.corpus.expansion_failures {
            let _ = writeln!(out, "  - {} (cited by {}): {}", f.cited, f.citing, one_line(&f.reason));
        }
    }
    out
}
