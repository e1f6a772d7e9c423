//! Contribution–limitation bipartite graph and the novelty rule.
//!
//! The model proposes structure (which contributions address which
//! limitations, and which limitations a proposal links to). The verdict is
//! computed here, without a model call:
//!
//! * a limitation node is *addressed* iff some contribution node has an edge
//!   into it;
//! * no linked limitations → `undetermined`;
//! * every linked limitation addressed → `incremental`;
//! * at least one linked limitation unaddressed → `conceptually_novel`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::PivotError;
use crate::corpus::PaperRecord;
use crate::facets::FacetFamily;
use crate::gateway::schema::{GraphResponse, LinkResponse};
use crate::gateway::{Gateway, TaskRequest, TemplateId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContributionNode {
    pub node_id: String,
    pub paper_id: String,
    pub statement: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitationKind {
    Limitation,
    FutureWork,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LimitationNode {
    pub node_id: String,
    pub paper_id: String,
    pub statement: String,
    pub kind: LimitationKind,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub contribution: String,
    pub limitation: String,
}

impl Edge {
    pub fn new(contribution: impl Into<String>, limitation: impl Into<String>) -> Self {
        Edge { contribution: contribution.into(), limitation: limitation.into() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContributionLimitationGraph {
    pub contribution_nodes: Vec<ContributionNode>,
    pub limitation_nodes: Vec<LimitationNode>,
    pub edges: BTreeSet<Edge>,
}

impl ContributionLimitationGraph {
    pub fn is_empty(&self) -> bool {
        self.contribution_nodes.is_empty() && self.limitation_nodes.is_empty()
    }

    pub fn contribution_ids(&self) -> BTreeSet<&str> {
        self.contribution_nodes.iter().map(|n| n.node_id.as_str()).collect()
    }

    pub fn limitation_ids(&self) -> BTreeSet<&str> {
        self.limitation_nodes.iter().map(|n| n.node_id.as_str()).collect()
    }

    pub fn limitation(&self, id: &str) -> Option<&LimitationNode> {
        self.limitation_nodes.iter().find(|n| n.node_id == id)
    }

    /// Add an edge when both endpoints exist on the correct sides.
    pub fn add_edge(&mut self, edge: Edge) -> bool {
        if self.contribution_ids().contains(edge.contribution.as_str())
            && self.limitation_ids().contains(edge.limitation.as_str())
        {
            self.edges.insert(edge);
            true
        } else {
            false
        }
    }

    /// Limitation nodes with at least one incoming edge from an existing
    /// contribution node.
    pub fn addressed(&self) -> BTreeSet<&str> {
        let contributions = self.contribution_ids();
        self.edges
            .iter()
            .filter(|e| contributions.contains(e.contribution.as_str()))
            .map(|e| e.limitation.as_str())
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProposedLinks {
    pub proposed_statement: String,
    pub linked: BTreeSet<String>,
    pub rationales: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Novelty {
    Incremental,
    ConceptuallyNovel,
    Undetermined,
}

impl fmt::Display for Novelty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Novelty::Incremental => "incremental",
            Novelty::ConceptuallyNovel => "conceptually novel",
            Novelty::Undetermined => "undetermined",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoveltyVerdict {
    pub verdict: Novelty,
    pub addressed_links: BTreeSet<String>,
    pub unaddressed_links: BTreeSet<String>,
}

impl NoveltyVerdict {
    pub fn describe(&self) -> String {
        match self.verdict {
            Novelty::Undetermined => "undetermined (the proposal links to no known limitation)".to_string(),
            Novelty::Incremental => format!(
                "incremental (all {} linked limitation(s) are already addressed by prior contributions)",
                self.addressed_links.len()
            ),
            Novelty::ConceptuallyNovel => format!(
                "conceptually novel ({} of {} linked limitation(s) remain unaddressed by prior contributions)",
                self.unaddressed_links.len(),
                self.unaddressed_links.len() + self.addressed_links.len()
            ),
        }
    }
}

/// Pure novelty rule. Linked ids absent from the graph have no incoming
/// edges and so count as unaddressed.
pub fn classify_novelty(graph: &ContributionLimitationGraph, links: &ProposedLinks) -> NoveltyVerdict {
    let addressed = graph.addressed();
    let (addressed_links, unaddressed_links): (BTreeSet<String>, BTreeSet<String>) =
        links.linked.iter().cloned().partition(|id| addressed.contains(id.as_str()));
    let verdict = if links.linked.is_empty() {
        Novelty::Undetermined
    } else if unaddressed_links.is_empty() {
        Novelty::Incremental
    } else {
        Novelty::ConceptuallyNovel
    };
    NoveltyVerdict { verdict, addressed_links, unaddressed_links }
}

/// Build the nodes from the papers' extracted statements. Papers are taken in
/// id order so node numbering is stable.
pub fn graph_nodes(papers: &[&PaperRecord]) -> ContributionLimitationGraph {
    let mut sorted: Vec<&PaperRecord> = papers.to_vec();
    sorted.sort_by(|a, b| a.paper_id.cmp(&b.paper_id));
    let mut g = ContributionLimitationGraph::default();
    for p in &sorted {
        for s in p.facets.get(FacetFamily::Contributions) {
            g.contribution_nodes.push(ContributionNode {
                node_id: format!("C{}", g.contribution_nodes.len() + 1),
                paper_id: p.paper_id.clone(),
                statement: s.statement.clone(),
            });
        }
    }
    for p in &sorted {
        for (family, kind) in [(FacetFamily::Limitations, LimitationKind::Limitation), (FacetFamily::FutureWork, LimitationKind::FutureWork)] {
            for s in p.facets.get(family) {
                g.limitation_nodes.push(LimitationNode {
                    node_id: format!("L{}", g.limitation_nodes.len() + 1),
                    paper_id: p.paper_id.clone(),
                    statement: s.statement.clone(),
                    kind,
                });
            }
        }
    }
    g
}

fn limitation_lines(graph: &ContributionLimitationGraph) -> String {
    graph
        .limitation_nodes
        .iter()
        .map(|n| {
            let kind = match n.kind {
                LimitationKind::Limitation => "limitation",
                LimitationKind::FutureWork => "future work",
            };
            format!("{} [{}; {kind}]: {}", n.node_id, n.paper_id, n.statement)
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphBuild {
    pub graph: ContributionLimitationGraph,
    pub warnings: Vec<String>,
}

/// Ask the model for edges between the selected papers' contributions and
/// limitations. Edges naming unknown nodes are dropped.
pub fn build_graph(gateway: &Gateway, papers: &[&PaperRecord]) -> Result<GraphBuild, PivotError> {
    if papers.is_empty() {
        return Err(PivotError::EmptySelection);
    }
    let mut graph = graph_nodes(papers);
    let mut warnings = Vec::new();
    if graph.contribution_nodes.is_empty() || graph.limitation_nodes.is_empty() {
        return Ok(GraphBuild { graph, warnings });
    }
    let contributions = graph
        .contribution_nodes
        .iter()
        .map(|n| format!("{} [{}]: {}", n.node_id, n.paper_id, n.statement))
        .collect::<Vec<_>>()
        .join("\n");
    let task = TaskRequest::new(TemplateId::BuildGraph)
        .var("contributions", contributions)
        .var("limitations", limitation_lines(&graph));
    let (resp, _) = gateway.execute_as::<GraphResponse>(&task)?;
    for e in resp.edges {
        let edge = Edge::new(e.contribution.trim(), e.limitation.trim());
        if !graph.add_edge(edge.clone()) {
            warnings.push(format!("dropped edge {} -> {}: unknown node", edge.contribution, edge.limitation));
        }
    }
    Ok(GraphBuild { graph, warnings })
}

/// Link a proposed contribution to the limitation nodes it would address.
pub fn link_proposed(
    gateway: &Gateway,
    graph: &ContributionLimitationGraph,
    proposal: &str,
) -> Result<(ProposedLinks, Vec<String>), PivotError> {
    let mut links = ProposedLinks { proposed_statement: proposal.to_string(), ..Default::default() };
    let mut warnings = Vec::new();
    if graph.limitation_nodes.is_empty() {
        return Ok((links, warnings));
    }
    let task = TaskRequest::new(TemplateId::LinkContribution)
        .var("proposal", proposal)
        .var("limitations", limitation_lines(graph));
    let (resp, _) = gateway.execute_as::<LinkResponse>(&task)?;
    let known = graph.limitation_ids();
    for l in resp.links {
        let id = l.limitation.trim().to_string();
        if known.contains(id.as_str()) {
            links.rationales.insert(id.clone(), l.rationale);
            links.linked.insert(id);
        } else {
            warnings.push(format!("dropped link to unknown limitation {id:?}"));
        }
    }
    Ok((links, warnings))
}

/// Graphs keyed by a digest of the selection's statements and the prompt
/// version, so a repeated selection does not rebuild.
#[derive(Debug, Default)]
pub struct GraphCache {
    graphs: Mutex<BTreeMap<String, GraphBuild>>,
}

impl GraphCache {
    pub fn new() -> Self {
        GraphCache::default()
    }

    pub fn key(papers: &[&PaperRecord]) -> String {
        let nodes = graph_nodes(papers);
        let mut h = Sha256::new();
        h.update(TemplateId::BuildGraph.prompt_version().as_bytes());
        h.update(serde_json::to_vec(&nodes).expect("graph serializes"));
        hex::encode(h.finalize())
    }

    pub fn get_or_build(&self, gateway: &Gateway, papers: &[&PaperRecord]) -> Result<GraphBuild, PivotError> {
        let key = Self::key(papers);
        if let Some(hit) = self.graphs.lock().expect("graph cache poisoned").get(&key) {
            return Ok(hit.clone());
        }
        let built = build_graph(gateway, papers)?;
        self.graphs.lock().expect("graph cache poisoned").insert(key, built.clone());
        Ok(built)
    }

    pub fn len(&self) -> usize {
        self.graphs.lock().expect("graph cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
