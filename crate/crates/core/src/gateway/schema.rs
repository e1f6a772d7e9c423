//! Response shapes, one per template.
//!
//! Validation is a typed decode followed by per-shape content checks. A value
//! leaves the gateway only after both pass.

use std::collections::BTreeMap;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::templates::TemplateId;
use crate::corpus::RelevanceCategory;
use crate::document::FacetType;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentSpan {
    pub facet: FacetType,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationResponse {
    pub segments: Vec<SegmentSpan>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractedStatement {
    pub statement: String,
    pub section: String,
    #[serde(default)]
    pub citations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatementsResponse {
    pub statements: Vec<ExtractedStatement>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceResponse {
    pub category: RelevanceCategory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterDraft {
    pub label: String,
    pub papers: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringResponse {
    pub clusters: Vec<ClusterDraft>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterRankingResponse {
    pub clusters: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeDraft {
    pub contribution: String,
    pub limitation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphResponse {
    pub edges: Vec<EdgeDraft>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkDraft {
    pub limitation: String,
    #[serde(default)]
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkResponse {
    pub links: Vec<LinkDraft>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FindingDraft {
    pub claim: String,
    pub evidence: String,
    pub paper_id: String,
    #[serde(default)]
    pub section: Option<String>,
}

/// Shared by the three facet checkers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResponse {
    pub findings: Vec<FindingDraft>,
    pub verdict: String,
    pub rewrite: String,
    #[serde(default)]
    pub elements: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffectedDraft {
    pub segment_id: String,
    #[serde(default)]
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffectedResponse {
    pub affected: Vec<AffectedDraft>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuidanceDraft {
    pub facet: FacetType,
    pub prompt: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingGuidanceResponse {
    pub guidance: Vec<GuidanceDraft>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryResponse {
    pub summary: String,
    #[serde(default)]
    pub priorities: Vec<String>,
}

fn nonempty(field: &str, value: &str) -> Result<(), String> {
    if value.trim().is_empty() {
        Err(format!("`{field}` must be a non-empty string"))
    } else {
        Ok(())
    }
}

fn decode<T: DeserializeOwned>(value: &Value) -> Result<T, String> {
    T::deserialize(value).map_err(|e| e.to_string())
}

/// Strip code fences and surrounding prose, then parse the outermost object.
pub fn extract_json(raw: &str) -> Result<Value, String> {
    let trimmed = raw.trim();
    if let Ok(v) = serde_json::from_str::<Value>(trimmed) {
        return Ok(v);
    }
    let start = trimmed.find('{').ok_or("response contains no JSON object")?;
    let end = trimmed.rfind('}').ok_or("response contains no JSON object")?;
    if end < start {
        return Err("response contains no JSON object".into());
    }
    serde_json::from_str(&trimmed[start..=end]).map_err(|e| format!("invalid JSON: {e}"))
}

/// Parse and validate a raw model response against the template's schema.
pub fn validate(template: TemplateId, raw: &str) -> Result<Value, String> {
    let value = extract_json(raw)?;
    if !value.is_object() {
        return Err("top-level value must be an object".into());
    }
    match template {
        TemplateId::SegmentIdea => {
            let r: SegmentationResponse = decode(&value)?;
            r.segments.iter().try_for_each(|s| nonempty("segments[].text", &s.text))?;
        }
        TemplateId::ExtractFacet => {
            let r: StatementsResponse = decode(&value)?;
            for s in &r.statements {
                nonempty("statements[].statement", &s.statement)?;
                nonempty("statements[].section", &s.section)?;
            }
        }
        TemplateId::ClassifyRelevance => {
            decode::<RelevanceResponse>(&value)?;
        }
        TemplateId::ClusterFacet => {
            let r: ClusteringResponse = decode(&value)?;
            r.clusters.iter().try_for_each(|c| nonempty("clusters[].label", &c.label))?;
        }
        TemplateId::RankClusters => {
            decode::<ClusterRankingResponse>(&value)?;
        }
        TemplateId::BuildGraph => {
            decode::<GraphResponse>(&value)?;
        }
        TemplateId::LinkContribution => {
            decode::<LinkResponse>(&value)?;
        }
        TemplateId::CheckProblem | TemplateId::CheckContribution | TemplateId::CheckEvaluation => {
            let r: CheckResponse = decode(&value)?;
            nonempty("verdict", &r.verdict)?;
            nonempty("rewrite", &r.rewrite)?;
            for f in &r.findings {
                nonempty("findings[].claim", &f.claim)?;
                nonempty("findings[].evidence", &f.evidence)?;
                nonempty("findings[].paper_id", &f.paper_id)?;
            }
        }
        TemplateId::AffectedFacets => {
            decode::<AffectedResponse>(&value)?;
        }
        TemplateId::MissingFacets => {
            decode::<MissingGuidanceResponse>(&value)?;
        }
        TemplateId::FullAssessment => {
            let r: SummaryResponse = decode(&value)?;
            nonempty("summary", &r.summary)?;
        }
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fenced_json_is_accepted() {
        let raw = "```json\n{\"category\": \"complementary\"}\n```";
        assert!(validate(TemplateId::ClassifyRelevance, raw).is_ok());
    }

    #[test]
    fn wrong_enum_value_is_rejected() {
        let err = validate(TemplateId::ClassifyRelevance, r#"{"category": "very"}"#).unwrap_err();
        assert!(err.contains("unknown variant"), "{err}");
    }

    #[test]
    fn empty_statement_is_rejected() {
        let raw = r#"{"statements": [{"statement": " ", "section": "intro"}]}"#;
        assert!(validate(TemplateId::ExtractFacet, raw).is_err());
    }

    #[test]
    fn garbage_is_rejected() {
        assert!(validate(TemplateId::BuildGraph, "not json at all").is_err());
        assert!(validate(TemplateId::BuildGraph, "[1,2]").is_err());
        assert!(validate(TemplateId::BuildGraph, r#"{"edges": 3}"#).is_err());
    }
}
