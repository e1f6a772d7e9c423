//! Prompt templates. Each template owns exactly one response schema and the
//! two are versioned together.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::TaskClass;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TemplateId {
    SegmentIdea,
    ExtractFacet,
    CheckProblem,
    BuildGraph,
    LinkContribution,
    CheckContribution,
    CheckEvaluation,
    AffectedFacets,
    MissingFacets,
    RankClusters,
    ClusterFacet,
    FullAssessment,
    ClassifyRelevance,
}

impl TemplateId {
    pub const ALL: [TemplateId; 13] = [
        TemplateId::SegmentIdea,
        TemplateId::ExtractFacet,
        TemplateId::CheckProblem,
        TemplateId::BuildGraph,
        TemplateId::LinkContribution,
        TemplateId::CheckContribution,
        TemplateId::CheckEvaluation,
        TemplateId::AffectedFacets,
        TemplateId::MissingFacets,
        TemplateId::RankClusters,
        TemplateId::ClusterFacet,
        TemplateId::FullAssessment,
        TemplateId::ClassifyRelevance,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::SegmentIdea => "segment_idea",
            TemplateId::ExtractFacet => "extract_facet",
            TemplateId::CheckProblem => "check_problem",
            TemplateId::BuildGraph => "build_graph",
            TemplateId::LinkContribution => "link_contribution",
            TemplateId::CheckContribution => "check_contribution",
            TemplateId::CheckEvaluation => "check_evaluation",
            TemplateId::AffectedFacets => "affected_facets",
            TemplateId::MissingFacets => "missing_facets",
            TemplateId::RankClusters => "rank_clusters",
            TemplateId::ClusterFacet => "cluster_facet",
            TemplateId::FullAssessment => "full_assessment",
            TemplateId::ClassifyRelevance => "classify_relevance",
        }
    }

    /// Short appendix-style alias (`B.1` ..), accepted wherever a template id
    /// is parsed.
    pub fn alias(self) -> Option<&'static str> {
        Some(match self {
            TemplateId::SegmentIdea => "B.1",
            TemplateId::ExtractFacet => "B.2",
            TemplateId::CheckProblem => "B.3",
            TemplateId::BuildGraph => "B.4",
            TemplateId::LinkContribution => "B.5",
            TemplateId::CheckEvaluation => "B.6",
            TemplateId::AffectedFacets => "B.7",
            TemplateId::MissingFacets => "B.8",
            TemplateId::RankClusters => "B.9",
            TemplateId::ClusterFacet => "B.10",
            TemplateId::FullAssessment => "B.11",
            TemplateId::CheckContribution | TemplateId::ClassifyRelevance => return None,
        })
    }

    /// Template version. Bump whenever the prompt text or schema changes.
    pub fn revision(self) -> u32 {
        1
    }

    /// `name@revision`; used in cache keys.
    pub fn prompt_version(self) -> String {
        format!("{}@{}", self.as_str(), self.revision())
    }

    pub fn schema_id(self) -> String {
        format!("{}/schema@{}", self.as_str(), self.revision())
    }

    /// The task class the pipeline uses for this template.
    pub fn default_class(self) -> TaskClass {
        match self {
            TemplateId::SegmentIdea
            | TemplateId::ExtractFacet
            | TemplateId::AffectedFacets
            | TemplateId::MissingFacets
            | TemplateId::RankClusters
            | TemplateId::ClassifyRelevance => TaskClass::Structured,
            TemplateId::BuildGraph
            | TemplateId::LinkContribution
            | TemplateId::CheckProblem
            | TemplateId::CheckContribution
            | TemplateId::CheckEvaluation
            | TemplateId::FullAssessment => TaskClass::Reasoning,
            TemplateId::ClusterFacet => TaskClass::LongContext,
        }
    }

    pub fn text(self) -> &'static str {
        match self {
            TemplateId::SegmentIdea => SEGMENT_IDEA,
            TemplateId::ExtractFacet => EXTRACT_FACET,
            TemplateId::CheckProblem => CHECK_PROBLEM,
            TemplateId::BuildGraph => BUILD_GRAPH,
            TemplateId::LinkContribution => LINK_CONTRIBUTION,
            TemplateId::CheckContribution => CHECK_CONTRIBUTION,
            TemplateId::CheckEvaluation => CHECK_EVALUATION,
            TemplateId::AffectedFacets => AFFECTED_FACETS,
            TemplateId::MissingFacets => MISSING_FACETS,
            TemplateId::RankClusters => RANK_CLUSTERS,
            TemplateId::ClusterFacet => CLUSTER_FACET,
            TemplateId::FullAssessment => FULL_ASSESSMENT,
            TemplateId::ClassifyRelevance => CLASSIFY_RELEVANCE,
        }
    }

    /// Placeholder names appearing in the template, in order of first use.
    pub fn placeholders(self) -> Vec<&'static str> {
        let text = self.text();
        let mut out: Vec<&'static str> = Vec::new();
        let mut rest = text;
        while let Some(open) = rest.find("{{") {
            let after = &rest[open + 2..];
            let Some(close) = after.find("}}") else { break };
            let name = &after[..close];
            if !out.contains(&name) {
                out.push(name);
            }
            rest = &after[close + 2..];
        }
        out
    }

    /// Fill every placeholder. Fails with the first placeholder lacking a value.
    pub fn render(self, variables: &BTreeMap<String, String>) -> Result<String, &'static str> {
        let mut prompt = String::with_capacity(self.text().len());
        let mut rest = self.text();
        while let Some(open) = rest.find("{{") {
            let after = &rest[open + 2..];
            let Some(close) = after.find("}}") else { break };
            let name = &after[..close];
            prompt.push_str(&rest[..open]);
            prompt.push_str(variables.get(name).ok_or(name)?);
            rest = &after[close + 2..];
        }
        prompt.push_str(rest);
        Ok(prompt)
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TemplateId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        TemplateId::ALL
            .into_iter()
            .find(|t| t.as_str() == s || t.alias() == Some(s))
            .ok_or_else(|| format!("unknown template id `{s}`"))
    }
}

impl Serialize for TemplateId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for TemplateId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

const JSON_ONLY: &str = "Respond with a single JSON object and nothing else.";

const SEGMENT_IDEA: &str = r#"You help a researcher structure a draft research idea.
Split the idea below into facets. A facet is one of:
- problem: the gap, difficulty, or need the research targets
- contribution: what the researcher proposes to build, study, or show
- evaluation: how the researcher will test whether the contribution works
Copy each facet's text verbatim from the idea; do not paraphrase. A facet type
may appear more than once. Leave out facet types the idea does not articulate.

Idea:
"""
{{idea}}
"""

Return {"segments": [{"facet": "problem" | "contribution" | "evaluation", "text": "<verbatim span>"}]}.
"#;

const EXTRACT_FACET: &str = r#"You read scientific papers and extract statements of one kind.
Extract every {{family_description}} stated in the paper below.
Quote or closely restate each statement, keep any citation markers (such as [12])
exactly as they appear, and name the section it came from.

Paper {{paper_id}}: {{title}}
Sections available: {{section_labels}}

{{paper_text}}

Return {"statements": [{"statement": "...", "section": "<one of the available section labels>", "citations": ["<citation marker>"]}]}.
Return an empty list when the paper states none.
"#;

const CHECK_PROBLEM: &str = r#"You assess the problem statement of a research idea against selected literature.
A strong problem statement is grounded in citable prior work, shows the problem
is real through evidence of prevalence, failures, gaps, or stakeholder pain
points, and argues why it matters through impact, risk, or opportunity.
Decide whether the draft can cite at least one matching problem statement from
the selected papers. Every finding must quote an evidence snippet copied
verbatim from the paper text provided.

Draft problem:
"""
{{facet_text}}
"""

Problem statements from the selected papers:
{{paper_statements}}

Paper text available for quoting:
{{paper_text}}

{{steering}}
{{revision_note}}

Return {"findings": [{"claim": "...", "evidence": "<verbatim snippet>", "paper_id": "...", "section": "..."}],
"verdict": "<one paragraph>",
"rewrite": "<rewritten problem statement>",
"elements": {"problem": "<what the problem is>", "evidence": "<evidence it is real>", "significance": "<why it matters>"}}.
"#;

const BUILD_GRAPH: &str = r#"You build a bipartite graph between prior contributions and open limitations.
Contributions (C-nodes) and limitation or future-work statements (L-nodes) are
listed below. Add an edge C->L when the contribution directly addresses the
limitation. Only use node ids from the lists.

Contributions:
{{contributions}}

Limitations and future work:
{{limitations}}

Return {"edges": [{"contribution": "C1", "limitation": "L1"}]}.
"#;

const LINK_CONTRIBUTION: &str = r#"You position a proposed research contribution against known limitations.
Select the limitation and future-work nodes that the proposed contribution
would address, and give a one-sentence rationale for each link.

Proposed contribution:
"""
{{proposal}}
"""

Limitations and future work:
{{limitations}}

Return {"links": [{"limitation": "L1", "rationale": "..."}]}.
"#;

const CHECK_CONTRIBUTION: &str = r#"You assess the contribution of a research idea against selected literature.
Judge whether it directly addresses the stated problem, whether success is
plausible given its methods and constraints, and how it is positioned relative
to the linked limitations and future work. Every finding must quote an
evidence snippet copied verbatim from the paper text provided.

Draft contribution:
"""
{{facet_text}}
"""

Stated problem:
"""
{{problem_text}}
"""

Novelty analysis: {{novelty}}
Linked limitations:
{{linked}}

Contributions from the selected papers:
{{paper_statements}}

Paper text available for quoting:
{{paper_text}}

{{steering}}
{{revision_note}}

Return {"findings": [{"claim": "...", "evidence": "<verbatim snippet>", "paper_id": "...", "section": "..."}],
"verdict": "<one paragraph>",
"rewrite": "<rewritten contribution>",
"elements": {"addresses_problem": "...", "plausibility": "...", "positioning": "..."}}.
"#;

const CHECK_EVALUATION: &str = r#"You assess the evaluation plan of a research idea against selected literature.
A strong evaluation tests whether the contribution addresses the problem,
answers the research questions, and is plausible against how similar
contributions are evaluated in prior work. Surface evaluation patterns from the
examples for the researcher to review; do not hide methods you consider weak.
Every finding must quote an evidence snippet copied verbatim from the paper
text provided.

Problem:
"""
{{problem_text}}
"""

Contribution:
"""
{{contribution_text}}
"""

Draft evaluation:
"""
{{facet_text}}
"""

How the selected papers evaluate similar work:
{{paper_statements}}

Paper text available for quoting:
{{paper_text}}

{{steering}}
{{revision_note}}

Return {"findings": [{"claim": "...", "evidence": "<verbatim snippet>", "paper_id": "...", "section": "..."}],
"verdict": "<one paragraph>",
"rewrite": "<rewritten evaluation>",
"elements": {"alignment": "<whether the evaluation shows the contribution addresses the problem>", "feasibility": "<whether the plan is feasible and sensitive enough to detect the intended effect>"}}.
"#;

const AFFECTED_FACETS: &str = r#"A researcher just revised one facet of their idea. Identify which other
facets must now be revised to keep the idea internally consistent, for example
a problem the new contribution no longer addresses, or metrics the new
contribution no longer fits.

Revised idea:
"""
{{idea}}
"""

Facets (id, type, text):
{{segments}}

Edited facet: {{edited_segment}}

Literature analysis:
{{analysis}}

Return {"affected": [{"segment_id": "...", "reason": "..."}]}. Return an empty list if nothing else needs revision.
"#;

const MISSING_FACETS: &str = r#"A research idea is missing some core facets. For each missing facet, write a
short question that prompts the researcher to draft it.

Idea:
"""
{{idea}}
"""

Missing facets: {{missing}}

Return {"guidance": [{"facet": "problem" | "contribution" | "evaluation", "prompt": "..."}]}.
"#;

const RANK_CLUSTERS: &str = r#"A researcher is working on one facet of their idea. Given the facet text and
the names of literature clusters, choose the clusters most useful for
developing this facet.

Facet ({{facet_type}}):
"""
{{facet_text}}
"""

Clusters:
{{cluster_names}}

Return {"clusters": ["<cluster name exactly as listed>"]}.
"#;

const CLUSTER_FACET: &str = r#"Group papers by the similarity of their {{facet_type}} statements and give
each group a short descriptive label of at most 60 characters. A paper may
belong to more than one group.

Statements (paper id: statement):
{{statements}}

Return {"clusters": [{"label": "...", "papers": ["<paper id>"]}]}.
"#;

const FULL_ASSESSMENT: &str = r#"Write an overall assessment of a research idea from the facet assessments
below. Summarize how well the idea is grounded in the literature and list the
revisions that matter most, in priority order.

Idea:
"""
{{idea}}
"""

Facet assessments:
{{assessments}}

Missing facets: {{missing}}

Return {"summary": "...", "priorities": ["..."]}.
"#;

const CLASSIFY_RELEVANCE: &str = r#"Judge how relevant a paper is to a researcher's idea.
- perfectly_relevant: the paper addresses the same problem or proposes closely related work
- somewhat_relevant: the paper overlaps with part of the idea
- complementary: the paper offers methods, data, or findings the idea could build on
- not_relevant: none of the above

Idea:
"""
{{idea}}
"""

Paper {{paper_id}}: {{title}}
{{summary}}

Return {"category": "perfectly_relevant" | "somewhat_relevant" | "complementary" | "not_relevant"}.
"#;

/// Appended to every rendered prompt.
pub fn json_instruction() -> &'static str {
    JSON_ONLY
}
