use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use facetlit_core::corpus::{CorpusStore, PaperRecord, Provenance, RelevanceCategory};
use facetlit_core::document::{char_slice, CharRange, EditOperation, FacetType, IdeaDocument, SegmentDraft};
use facetlit_core::facets::{anchor_span, normalize_spans};
use facetlit_core::gateway::schema::extract_json;
use facetlit_core::organizer::order_corpus;
use facetlit_core::pivot::{
    classify_novelty, locate_evidence, normalize_ws, ContributionLimitationGraph, ContributionNode, Edge,
    LimitationKind, LimitationNode, Novelty, ProposedLinks,
};

fn text() -> impl Strategy<Value = String> {
    proptest::collection::vec(prop_oneof![Just('a'), Just('b'), Just(' '), Just('\n'), Just('é'), Just('漢')], 0..40)
        .prop_map(|v| v.into_iter().collect())
}

fn graph(nc: usize, nl: usize, edges: &BTreeSet<(usize, usize)>) -> ContributionLimitationGraph {
    ContributionLimitationGraph {
        contribution_nodes: (0..nc)
            .map(|i| ContributionNode { node_id: format!("C{i}"), paper_id: "p".into(), statement: "c".into() })
            .collect(),
        limitation_nodes: (0..nl)
            .map(|j| LimitationNode {
                node_id: format!("L{j}"),
                paper_id: "p".into(),
                statement: "l".into(),
                kind: LimitationKind::FutureWork,
            })
            .collect(),
        edges: edges.iter().map(|(i, j)| Edge::new(format!("C{i}"), format!("L{j}"))).collect(),
    }
}

fn links(ids: impl IntoIterator<Item = String>) -> ProposedLinks {
    ProposedLinks { proposed_statement: "x".into(), linked: ids.into_iter().collect(), rationales: BTreeMap::new() }
}

proptest! {
    #[test]
    fn more_edges_never_add_unaddressed_links(
        edges in proptest::collection::btree_set((0..4usize, 0..5usize), 0..12),
        extra in (0..4usize, 0..5usize),
        linked in proptest::collection::btree_set(0..5usize, 0..5),
    ) {
        let l = links(linked.iter().map(|j| format!("L{j}")));
        let before = classify_novelty(&graph(4, 5, &edges), &l);
        let mut more = edges.clone();
        more.insert(extra);
        let after = classify_novelty(&graph(4, 5, &more), &l);
        prop_assert!(after.unaddressed_links.is_subset(&before.unaddressed_links));
        prop_assert_eq!(&before.addressed_links | &before.unaddressed_links, l.linked.clone());
        if before.verdict == Novelty::Incremental {
            prop_assert_eq!(after.verdict, Novelty::Incremental);
        }
    }

    #[test]
    fn edges_from_unknown_contributions_do_not_count(linked in proptest::collection::btree_set(0..3usize, 1..3)) {
        let mut g = graph(0, 3, &BTreeSet::new());
        for j in 0..3 {
            g.edges.insert(Edge::new("C-ghost", format!("L{j}")));
        }
        let v = classify_novelty(&g, &links(linked.iter().map(|j| format!("L{j}"))));
        prop_assert_eq!(v.verdict, Novelty::ConceptuallyNovel);
    }

    #[test]
    fn inverse_edit_restores_text(t in text(), a in 0..40usize, b in 0..40usize, rep in text()) {
        let mut doc = IdeaDocument::new("d", t.clone());
        let len = doc.char_len();
        let (s, e) = (a.min(b).min(len), a.max(b).min(len));
        let op = EditOperation::new(CharRange::new(s, e), rep);
        doc.apply_edit(&op).unwrap();
        doc.apply_edit(&op.inverse(&t)).unwrap();
        prop_assert_eq!(doc.text(), t.as_str());
    }

    #[test]
    fn edits_outside_a_segment_keep_its_text(t in text(), rep in text(), cut in 0..40usize) {
        let len = t.chars().count();
        prop_assume!(len >= 4);
        let mut doc = IdeaDocument::new("d", t.clone());
        doc.set_segments(vec![SegmentDraft::new(FacetType::Problem, CharRange::new(len / 2, len))]).unwrap();
        let id = doc.segments()[0].segment_id.clone();
        let before = doc.segment_text(&id).unwrap().to_string();
        let at = cut % (len / 2 + 1);
        let outcome = doc.apply_edit(&EditOperation::new(CharRange::new(at.min(len / 2), len / 2), rep)).unwrap();
        prop_assert_eq!(doc.segment_text(&id).unwrap(), before.as_str());
        prop_assert!(outcome.touched.is_empty());
        prop_assert!(doc.hashes_consistent());
    }

    #[test]
    fn normalize_ws_is_idempotent(t in text()) {
        let once = normalize_ws(&t);
        prop_assert_eq!(normalize_ws(&once), once.clone());
        prop_assert!(!once.contains("  "));
    }

    #[test]
    fn any_window_of_a_passage_is_located(
        words in proptest::collection::vec("[a-z]{1,6}", 5..30),
        start in 0..30usize,
        len in 1..8usize,
        sep in prop_oneof![Just(" "), Just("\n"), Just("  \t")],
    ) {
        let mut p = PaperRecord::new("p", Provenance::SeedRetrieval);
        p.sections.insert("methods".into(), words.join(" "));
        let s = start % words.len();
        let e = (s + len).min(words.len());
        let snippet = words[s..e].join(sep);
        prop_assert_eq!(locate_evidence(&p, &snippet, None), Some("methods".to_string()));
    }

    #[test]
    fn exact_spans_anchor_to_their_own_text(t in text(), a in 0..40usize, b in 0..40usize) {
        let len = t.chars().count();
        let (s, e) = (a.min(b).min(len), a.max(b).min(len));
        let span = char_slice(&t, CharRange::new(s, e));
        prop_assume!(!span.trim().is_empty());
        let r = anchor_span(&t, span, &[]).unwrap();
        prop_assert_eq!(char_slice(&t, r), span.trim());
    }

    #[test]
    fn normalized_spans_never_overlap(
        raw in proptest::collection::vec((0..3usize, 0..30usize, 0..30usize), 0..8),
    ) {
        let spans: Vec<(FacetType, CharRange)> = raw
            .into_iter()
            .map(|(f, a, b)| (FacetType::ALL[f], CharRange::new(a.min(b), a.max(b))))
            .collect();
        let out = normalize_spans(spans, &mut Vec::new());
        for w in out.windows(2) {
            prop_assert!(w[0].range.end <= w[1].range.start);
        }
        prop_assert!(out.iter().all(|d| !d.range.is_empty()));
    }

    #[test]
    fn ranking_is_a_sorted_permutation_of_classified_papers(
        rows in proptest::collection::btree_map("[a-z0-9]{1,4}", (proptest::option::of(0..4usize), 0..3usize), 0..20),
    ) {
        let cats = [
            RelevanceCategory::PerfectlyRelevant,
            RelevanceCategory::SomewhatRelevant,
            RelevanceCategory::Complementary,
            RelevanceCategory::NotRelevant,
        ];
        let provs = [Provenance::SeedRetrieval, Provenance::CitationExpansion, Provenance::UserAdded];
        let mut store = CorpusStore::default();
        for (id, (c, p)) in &rows {
            let mut rec = PaperRecord::new(id.clone(), provs[*p]);
            rec.relevance = c.map(|c| cats[c]);
            store.insert(rec);
        }
        let ranking = order_corpus(&store);
        let got: BTreeSet<&str> = ranking.entries.iter().map(|e| e.paper_id.as_str()).collect();
        let want: BTreeSet<&str> = rows.iter().filter(|(_, (c, _))| c.is_some()).map(|(id, _)| id.as_str()).collect();
        prop_assert_eq!(got.len(), ranking.entries.len());
        prop_assert_eq!(got, want);
        let key = |id: &str| {
            let (c, p) = rows[id];
            (c.unwrap(), p, id.to_string())
        };
        for w in ranking.entries.windows(2) {
            prop_assert!(key(&w[0].paper_id) < key(&w[1].paper_id));
        }
    }

    #[test]
    fn fenced_objects_parse(n in any::<i64>(), prose in "[a-zA-Z ]{0,20}") {
        let raw = format!("{prose}\n```json\n{{\"n\": {n}}}\n```\n");
        prop_assert_eq!(extract_json(&raw).unwrap(), serde_json::json!({ "n": n }));
    }
}
