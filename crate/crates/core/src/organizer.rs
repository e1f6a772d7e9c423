//! Relevance classification, corpus ordering, facet clustering, and cluster
//! starring.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CorpusStore, PaperRecord, RelevanceCategory};
use crate::document::{char_len, FacetType};
use crate::facets::FacetFamily;
use crate::gateway::schema::{ClusterRankingResponse, ClusteringResponse, RelevanceResponse};
use crate::gateway::{Gateway, GatewayError, TaskRequest, TemplateId};

pub const MAX_LABEL_CHARS: usize = 60;
pub const UNCATEGORIZED: &str = "Uncategorized";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FacetCluster {
    pub cluster_id: String,
    pub facet_type: FacetType,
    pub label: String,
    pub members: BTreeSet<String>,
    pub starred: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedPaper {
    pub paper_id: String,
    pub category: RelevanceCategory,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelevanceRanking {
    pub entries: Vec<RankedPaper>,
}

impl RelevanceRanking {
    pub fn ids(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.paper_id.as_str()).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OrganizerError {
    #[error("paper {0} has neither an abstract nor extracted facets")]
    NoContent(String),
    #[error("no clusters to rank")]
    NoClusters,
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

fn paper_summary(paper: &PaperRecord) -> String {
    let mut out = String::new();
    if !paper.abstract_text.is_empty() {
        out.push_str("Abstract: ");
        out.push_str(&paper.abstract_text);
    }
    for family in [FacetFamily::Problems, FacetFamily::Contributions] {
        for s in paper.facets.get(family) {
            out.push_str(&format!("\n{family}: {}", s.statement));
        }
    }
    out
}

pub fn classify_relevance(
    gateway: &Gateway,
    paper: &PaperRecord,
    idea_text: &str,
) -> Result<RelevanceCategory, OrganizerError> {
    if paper.abstract_text.trim().is_empty() && paper.facets.is_empty() {
        return Err(OrganizerError::NoContent(paper.paper_id.clone()));
    }
    let task = TaskRequest::new(TemplateId::ClassifyRelevance)
        .var("idea", idea_text)
        .var("paper_id", paper.paper_id.clone())
        .var("title", paper.title.clone())
        .var("summary", paper_summary(paper));
    let (resp, _) = gateway.execute_as::<RelevanceResponse>(&task)?;
    Ok(resp.category)
}

/// Classify every paper. Failures leave the category unset so the paper stays
/// out of ranked views; each failure yields one warning.
pub fn classify_all(gateway: &Gateway, store: &mut CorpusStore, idea_text: &str, concurrency: usize) -> Vec<String> {
    let ids: Vec<String> = store.papers.keys().cloned().collect();
    let mut warnings = Vec::new();
    for chunk in ids.chunks(concurrency.max(1)) {
        let results: Vec<(String, Result<RelevanceCategory, OrganizerError>)> = std::thread::scope(|scope| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|id| {
                    let paper = &store.papers[id];
                    scope.spawn(move || (paper.paper_id.clone(), classify_relevance(gateway, paper, idea_text)))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("classifier panicked")).collect()
        });
        for (id, res) in results {
            let paper = store.papers.get_mut(&id).expect("id from store");
            match res {
                Ok(c) => paper.relevance = Some(c),
                Err(e) => {
                    paper.relevance = None;
                    warnings.push(format!("{id}: relevance unset, excluded from ranking: {e}"));
                }
            }
        }
    }
    warnings
}

/// Category rank, then provenance (seed, expansion, user), then paper id.
/// Unclassified papers are left out.
pub fn order_corpus(store: &CorpusStore) -> RelevanceRanking {
    let mut rows: Vec<&PaperRecord> = store.papers.values().filter(|p| p.relevance.is_some()).collect();
    rows.sort_by(|a, b| {
        let ka = (a.relevance.unwrap().rank(), a.provenance().rank(), &a.paper_id);
        let kb = (b.relevance.unwrap().rank(), b.provenance().rank(), &b.paper_id);
        ka.cmp(&kb)
    });
    RelevanceRanking {
        entries: rows
            .into_iter()
            .map(|p| RankedPaper { paper_id: p.paper_id.clone(), category: p.relevance.unwrap() })
            .collect(),
    }
}

/// Papers holding at least one statement of the facet's family.
pub fn papers_with_family(store: &CorpusStore, facet: FacetType) -> BTreeSet<String> {
    let family = FacetFamily::for_facet(facet);
    store
        .papers
        .values()
        .filter(|p| !p.facets.get(family).is_empty())
        .map(|p| p.paper_id.clone())
        .collect()
}

fn truncate_chars(s: &str, max: usize) -> String {
    s.chars().take(max).collect::<String>().trim_end().to_string()
}

/// Cap a label at [`MAX_LABEL_CHARS`] and make it unique among `taken`.
fn unique_label(raw: &str, taken: &mut BTreeSet<String>) -> String {
    let base = truncate_chars(raw.trim(), MAX_LABEL_CHARS);
    if taken.insert(base.clone()) {
        return base;
    }
    for n in 2.. {
        let suffix = format!(" ({n})");
        let candidate = format!("{}{suffix}", truncate_chars(&base, MAX_LABEL_CHARS - char_len(&suffix)));
        if taken.insert(candidate.clone()) {
            return candidate;
        }
    }
    unreachable!()
}

/// Cluster the corpus on one facet family with a single long-context task.
pub fn cluster_by_facet(
    gateway: &Gateway,
    store: &CorpusStore,
    facet: FacetType,
) -> Result<Vec<FacetCluster>, OrganizerError> {
    let family = FacetFamily::for_facet(facet);
    let eligible = papers_with_family(store, facet);
    if eligible.is_empty() {
        return Ok(Vec::new());
    }
    let lines: Vec<String> = eligible
        .iter()
        .flat_map(|id| store.papers[id].facets.get(family).iter().map(move |s| format!("{id}: {}", s.statement)))
        .collect();
    let task = TaskRequest::new(TemplateId::ClusterFacet)
        .var("facet_type", facet.as_str())
        .var("statements", lines.join("\n"));
    let (resp, _) = gateway.execute_as::<ClusteringResponse>(&task)?;

    let mut taken = BTreeSet::new();
    let mut clusters = Vec::new();
    let mut covered = BTreeSet::new();
    for draft in resp.clusters {
        let members: BTreeSet<String> = draft.papers.into_iter().filter(|p| eligible.contains(p)).collect();
        if members.is_empty() {
            continue;
        }
        covered.extend(members.iter().cloned());
        clusters.push((unique_label(&draft.label, &mut taken), members));
    }
    let omitted: BTreeSet<String> = eligible.difference(&covered).cloned().collect();
    if !omitted.is_empty() {
        clusters.push((unique_label(UNCATEGORIZED, &mut taken), omitted));
    }
    Ok(clusters
        .into_iter()
        .enumerate()
        .map(|(i, (label, members))| FacetCluster {
            cluster_id: format!("{facet}-{}", i + 1),
            facet_type: facet,
            label,
            members,
            starred: false,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StarOutcome {
    pub starred: BTreeSet<String>,
    pub warnings: Vec<String>,
}

fn fallback_star(clusters: &[FacetCluster]) -> String {
    let mut best = &clusters[0];
    for c in &clusters[1..] {
        if c.members.len() > best.members.len() {
            best = c;
        }
    }
    best.cluster_id.clone()
}

/// Star the clusters most useful for the active facet. Always stars at least
/// one cluster; unknown names are ignored.
pub fn rank_clusters(
    gateway: &Gateway,
    facet: FacetType,
    facet_text: &str,
    clusters: &mut [FacetCluster],
) -> Result<StarOutcome, OrganizerError> {
    if clusters.is_empty() {
        return Err(OrganizerError::NoClusters);
    }
    let names: Vec<String> = clusters.iter().map(|c| format!("- {}", c.label)).collect();
    let task = TaskRequest::new(TemplateId::RankClusters)
        .var("facet_type", facet.as_str())
        .var("facet_text", facet_text)
        .var("cluster_names", names.join("\n"));
    let mut warnings = Vec::new();
    let mut starred = BTreeSet::new();
    match gateway.execute_as::<ClusterRankingResponse>(&task) {
        Ok((resp, _)) => {
            for name in resp.clusters {
                let wanted = name.trim().trim_start_matches("- ");
                let hit = clusters
                    .iter()
                    .find(|c| c.label == wanted)
                    .or_else(|| clusters.iter().find(|c| c.label.eq_ignore_ascii_case(wanted)));
                match hit {
                    Some(c) => {
                        starred.insert(c.cluster_id.clone());
                    }
                    None => warnings.push(format!("ignored unknown cluster name {name:?}")),
                }
            }
        }
        Err(e) => warnings.push(format!("cluster ranking failed, using fallback: {e}")),
    }
    if starred.is_empty() {
        starred.insert(fallback_star(clusters));
    }
    for c in clusters.iter_mut() {
        c.starred = starred.contains(&c.cluster_id);
    }
    Ok(StarOutcome { starred, warnings })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RerankOutcome {
    pub ranking: RelevanceRanking,
    /// Rebuilt clusterings; facets missing here failed and keep their old one.
    pub clusterings: BTreeMap<FacetType, Vec<FacetCluster>>,
    pub failures: Vec<String>,
    pub warnings: Vec<String>,
}

/// Reclassify relevance against the current idea and rebuild all three
/// facet clusterings, starring each against its facet text.
pub fn rerank(
    gateway: &Gateway,
    store: &mut CorpusStore,
    idea_text: &str,
    facet_texts: &BTreeMap<FacetType, String>,
    concurrency: usize,
) -> RerankOutcome {
    let mut out = RerankOutcome::default();
    if store.is_empty() {
        return out;
    }
    out.warnings.extend(classify_all(gateway, store, idea_text, concurrency));
    out.ranking = order_corpus(store);

    let snapshot: &CorpusStore = store;
    let built: Vec<(FacetType, Result<Vec<FacetCluster>, OrganizerError>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = FacetType::ALL
            .into_iter()
            .map(|f| scope.spawn(move || (f, cluster_by_facet(gateway, snapshot, f))))
            .collect();
        handles.into_iter().map(|h| h.join().expect("clustering panicked")).collect()
    });
    for (facet, res) in built {
        match res {
            Ok(mut clusters) => {
                if !clusters.is_empty() {
                    let text = facet_texts.get(&facet).map(String::as_str).unwrap_or(idea_text);
                    match rank_clusters(gateway, facet, text, &mut clusters) {
                        Ok(star) => out.warnings.extend(star.warnings),
                        Err(e) => out.warnings.push(format!("{facet}: {e}")),
                    }
                }
                out.clusterings.insert(facet, clusters);
            }
            Err(e) => out.failures.push(format!("{facet} clustering: {e}")),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Provenance;
    use crate::facets::Statement;
    use crate::gateway::{MockEntry, MockScript};
    use serde_json::json;

    fn paper(id: &str, prov: Provenance, cat: Option<RelevanceCategory>) -> PaperRecord {
        let mut p = PaperRecord::new(id, prov);
        p.abstract_text = format!("Abstract of {id}.");
        p.relevance = cat;
        p
    }

    fn with_contribution(mut p: PaperRecord, text: &str) -> PaperRecord {
        p.facets.contributions.push(Statement::new(text, "abstract", vec![]));
        p
    }

    #[test]
    fn classification_stored_and_unset_excluded() {
        let gw = Gateway::mock(
            MockScript::new()
                .with(MockEntry::new(TemplateId::ClassifyRelevance).when_eq("paper_id", "a").respond(json!({"category": "perfectly_relevant"})))
                .with(MockEntry::new(TemplateId::ClassifyRelevance).when_eq("paper_id", "b").malformed(3)),
        );
        let mut store = CorpusStore::default();
        store.insert(paper("a", Provenance::SeedRetrieval, None));
        store.insert(paper("b", Provenance::SeedRetrieval, None));
        let warnings = classify_all(&gw, &mut store, "idea", 2);
        assert_eq!(store.get("a").unwrap().relevance, Some(RelevanceCategory::PerfectlyRelevant));
        assert_eq!(store.get("b").unwrap().relevance, None);
        assert_eq!(warnings.len(), 1);
        assert_eq!(order_corpus(&store).ids(), vec!["a"]);
    }

    #[test]
    fn ties_break_on_provenance_then_id() {
        let mut store = CorpusStore::default();
        let p = Some(RelevanceCategory::PerfectlyRelevant);
        store.insert(paper("b", Provenance::SeedRetrieval, p));
        store.insert(paper("a", Provenance::UserAdded, p));
        store.insert(paper("c", Provenance::SeedRetrieval, p));
        store.insert(paper("z", Provenance::CitationExpansion, Some(RelevanceCategory::NotRelevant)));
        assert_eq!(order_corpus(&store).ids(), vec!["b", "c", "a", "z"]);
        assert!(order_corpus(&CorpusStore::default()).is_empty());
    }

    #[test]
    fn clustering_labels_and_uncategorized() {
        let mut store = CorpusStore::default();
        store.insert(with_contribution(paper("v1", Provenance::SeedRetrieval, None), "LLM + model checker"));
        store.insert(with_contribution(paper("v2", Provenance::SeedRetrieval, None), "LLM + Lean prover"));
        store.insert(with_contribution(paper("v3", Provenance::SeedRetrieval, None), "narrative generation"));
        store.insert(paper("nofacet", Provenance::SeedRetrieval, None));
        let gw = Gateway::mock(MockScript::new().with(MockEntry::new(TemplateId::ClusterFacet).respond(json!({
            "clusters": [
                {"label": "LLM-based formal verification frameworks", "papers": ["v1", "v2", "ghost", "nofacet"]},
                {"label": "Empty", "papers": []}
            ]
        }))));
        let clusters = cluster_by_facet(&gw, &store, FacetType::Contribution).unwrap();
        assert_eq!(clusters.len(), 2);
        assert_eq!(clusters[0].label, "LLM-based formal verification frameworks");
        assert_eq!(clusters[0].members, BTreeSet::from(["v1".to_string(), "v2".to_string()]));
        assert_eq!(clusters[1].label, UNCATEGORIZED);
        assert_eq!(clusters[1].members, BTreeSet::from(["v3".to_string()]));
        // no evaluation statements at all: nothing to cluster, no call
        let before = gw.audit_len();
        assert!(cluster_by_facet(&gw, &store, FacetType::Evaluation).unwrap().is_empty());
        assert_eq!(gw.audit_len(), before);
    }

    #[test]
    fn labels_capped_and_deduplicated() {
        let mut taken = BTreeSet::new();
        let long = "x".repeat(80);
        let a = unique_label(&long, &mut taken);
        let b = unique_label(&long, &mut taken);
        assert_eq!(char_len(&a), 60);
        assert_eq!(char_len(&b), 60);
        assert!(b.ends_with(" (2)"));
        assert_eq!(unique_label("Same", &mut taken), "Same");
        assert_eq!(unique_label("Same", &mut taken), "Same (2)");
        assert_eq!(unique_label("Same", &mut taken), "Same (3)");
    }

    fn clusters(n: usize) -> Vec<FacetCluster> {
        (0..n)
            .map(|i| FacetCluster {
                cluster_id: format!("contribution-{}", i + 1),
                facet_type: FacetType::Contribution,
                label: format!("Cluster {i}"),
                members: (0..=i).map(|m| format!("p{m}")).collect(),
                starred: false,
            })
            .collect()
    }

    #[test]
    fn stars_named_clusters_and_drops_unknown() {
        let gw = Gateway::mock(MockScript::new().with(
            MockEntry::new(TemplateId::RankClusters).respond(json!({"clusters": ["Cluster 1", "Cluster 3", "Invented"]})),
        ));
        let mut cs = clusters(5);
        let out = rank_clusters(&gw, FacetType::Contribution, "text", &mut cs).unwrap();
        assert_eq!(out.starred, BTreeSet::from(["contribution-2".to_string(), "contribution-4".to_string()]));
        assert_eq!(out.warnings.len(), 1);
        assert_eq!(cs.iter().filter(|c| c.starred).count(), 2);
    }

    #[test]
    fn empty_result_falls_back_to_largest() {
        let gw = Gateway::mock(MockScript::new().with(MockEntry::new(TemplateId::RankClusters).respond(json!({"clusters": ["nope"]}))));
        let mut cs = clusters(3);
        let out = rank_clusters(&gw, FacetType::Contribution, "text", &mut cs).unwrap();
        assert_eq!(out.starred, BTreeSet::from(["contribution-3".to_string()]));
        let mut one = clusters(1);
        let out = rank_clusters(&gw, FacetType::Contribution, "text", &mut one).unwrap();
        assert_eq!(out.starred.len(), 1);
        assert_eq!(rank_clusters(&gw, FacetType::Contribution, "t", &mut []), Err(OrganizerError::NoClusters));
    }

    #[test]
    fn rerank_on_empty_corpus_is_empty() {
        let gw = Gateway::mock(MockScript::new());
        let out = rerank(&gw, &mut CorpusStore::default(), "idea", &BTreeMap::new(), 4);
        assert!(out.ranking.is_empty() && out.clusterings.is_empty() && out.failures.is_empty());
        assert_eq!(gw.audit_len(), 0);
    }
}
