//! The idea document: text, typed facet segments, and an append-only event log.
//!
//! All offsets are half-open intervals over Unicode scalar values (`char`s),
//! never bytes. [`CharRange`] is the only offset type exchanged with the rest
//! of the crate.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// The three structural components of a research idea.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FacetType {
    Problem,
    Contribution,
    Evaluation,
}

impl FacetType {
    pub const ALL: [FacetType; 3] = [FacetType::Problem, FacetType::Contribution, FacetType::Evaluation];

    pub fn as_str(self) -> &'static str {
        match self {
            FacetType::Problem => "problem",
            FacetType::Contribution => "contribution",
            FacetType::Evaluation => "evaluation",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "problem" => Some(FacetType::Problem),
            "contribution" | "solution" => Some(FacetType::Contribution),
            "evaluation" => Some(FacetType::Evaluation),
            _ => None,
        }
    }
}

impl fmt::Display for FacetType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentStatus {
    Current,
    Stale,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SegmentId(pub String);

impl SegmentId {
    pub fn new(id: impl Into<String>) -> Self {
        SegmentId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SegmentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Half-open `[start, end)` interval of character indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CharRange {
    pub start: usize,
    pub end: usize,
}

impl CharRange {
    pub fn new(start: usize, end: usize) -> Self {
        CharRange { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn overlaps(&self, other: &CharRange) -> bool {
        self.start < other.end && other.start < self.end
    }
}

impl fmt::Display for CharRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start, self.end)
    }
}

/// Number of characters in `text`, in the crate's canonical unit.
pub fn char_len(text: &str) -> usize {
    text.chars().count()
}

fn byte_offset(text: &str, char_idx: usize) -> usize {
    text.char_indices().nth(char_idx).map(|(b, _)| b).unwrap_or(text.len())
}

/// Slice `text` by a character range. The range must be in bounds.
pub fn char_slice(text: &str, range: CharRange) -> &str {
    let start = byte_offset(text, range.start);
    let end = start + byte_offset(&text[start..], range.len());
    &text[start..end]
}

/// Hex SHA-256 of a piece of text.
pub fn content_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FacetSegment {
    pub segment_id: SegmentId,
    pub facet_type: FacetType,
    pub range: CharRange,
    pub content_hash: String,
    pub status: SegmentStatus,
}

/// A segment as supplied to [`IdeaDocument::set_segments`]. Missing ids are
/// assigned from the document version.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentDraft {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segment_id: Option<SegmentId>,
    pub facet_type: FacetType,
    pub range: CharRange,
}

impl SegmentDraft {
    pub fn new(facet_type: FacetType, range: CharRange) -> Self {
        SegmentDraft { segment_id: None, facet_type, range }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditOperation {
    pub range: CharRange,
    pub replacement: String,
}

impl EditOperation {
    pub fn new(range: CharRange, replacement: impl Into<String>) -> Self {
        EditOperation { range, replacement: replacement.into() }
    }

    pub fn insert(at: usize, text: impl Into<String>) -> Self {
        Self::new(CharRange::new(at, at), text)
    }

    /// The edit that undoes `self` when applied to the post-edit text.
    pub fn inverse(&self, pre_edit_text: &str) -> EditOperation {
        let removed = char_slice(pre_edit_text, self.range).to_string();
        let start = self.range.start;
        EditOperation::new(CharRange::new(start, start + char_len(&self.replacement)), removed)
    }
}

/// One record in the document's append-only log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DocEvent {
    Created { doc_id: String, text: String },
    Edited { edit: EditOperation, removed: Vec<SegmentId> },
    SegmentsSet { segments: Vec<SegmentDraft> },
    Flagged { segment_ids: BTreeSet<SegmentId>, status: SegmentStatus },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DocumentError {
    #[error("range {range} is out of bounds for text of length {len}")]
    OutOfBounds { range: CharRange, len: usize },
    #[error("range {0} has start after end")]
    InvertedRange(CharRange),
    #[error("segment range {0} is empty")]
    EmptySegment(CharRange),
    #[error("segments {first} {first_range} and {second} {second_range} overlap")]
    Overlap {
        first: SegmentId,
        first_range: CharRange,
        second: SegmentId,
        second_range: CharRange,
    },
    #[error("duplicate segment id {0}")]
    DuplicateSegment(SegmentId),
    #[error("unknown segment id {0}")]
    UnknownSegment(SegmentId),
    #[error("event log must start with a creation record")]
    MissingCreation,
    #[error("event {index} could not be replayed: {source}")]
    Replay {
        index: usize,
        #[source]
        source: Box<DocumentError>,
    },
}

/// What an accepted edit did to the segment list.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EditOutcome {
    /// Segments whose range collapsed to nothing and were dropped.
    pub removed: Vec<SegmentId>,
    /// Segments whose covered text changed.
    pub touched: Vec<SegmentId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdeaDocument {
    doc_id: String,
    text: String,
    version: u64,
    segments: Vec<FacetSegment>,
    events: Vec<DocEvent>,
}

impl IdeaDocument {
    pub fn new(doc_id: impl Into<String>, text: impl Into<String>) -> Self {
        let doc_id = doc_id.into();
        let text = text.into();
        IdeaDocument {
            events: vec![DocEvent::Created { doc_id: doc_id.clone(), text: text.clone() }],
            doc_id,
            text,
            version: 0,
            segments: Vec::new(),
        }
    }

    pub fn doc_id(&self) -> &str {
        &self.doc_id
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn segments(&self) -> &[FacetSegment] {
        &self.segments
    }

    pub fn events(&self) -> &[DocEvent] {
        &self.events
    }

    pub fn char_len(&self) -> usize {
        char_len(&self.text)
    }

    pub fn segment(&self, id: &SegmentId) -> Option<&FacetSegment> {
        self.segments.iter().find(|s| &s.segment_id == id)
    }

    pub fn segment_text(&self, id: &SegmentId) -> Option<&str> {
        self.segment(id).map(|s| char_slice(&self.text, s.range))
    }

    /// Segments of one facet type whose status is current.
    pub fn current_segments(&self, facet: FacetType) -> impl Iterator<Item = &FacetSegment> {
        self.segments
            .iter()
            .filter(move |s| s.facet_type == facet && s.status == SegmentStatus::Current)
    }

    /// All text of one facet type, segments joined by a space.
    pub fn facet_text(&self, facet: FacetType) -> Option<String> {
        let parts: Vec<&str> = self
            .segments
            .iter()
            .filter(|s| s.facet_type == facet)
            .map(|s| char_slice(&self.text, s.range))
            .collect();
        if parts.is_empty() {
            None
        } else {
            Some(parts.join(" "))
        }
    }

    fn check_range(&self, range: CharRange) -> Result<(), DocumentError> {
        if range.start > range.end {
            return Err(DocumentError::InvertedRange(range));
        }
        let len = self.char_len();
        if range.end > len {
            return Err(DocumentError::OutOfBounds { range, len });
        }
        Ok(())
    }

    /// Replace `edit.range` with `edit.replacement`, rebasing segments.
    ///
    /// Segments after the edit shift by the length delta. The first segment
    /// overlapping the edit absorbs the replacement; later overlapping ones are
    /// clipped to start after it. Segments left empty are removed.
    pub fn apply_edit(&mut self, edit: &EditOperation) -> Result<EditOutcome, DocumentError> {
        self.check_range(edit.range)?;
        let s = edit.range.start;
        let e = edit.range.end;
        let r = char_len(&edit.replacement);
        let shift = |x: usize| x + r - (e - s);

        let bs = byte_offset(&self.text, s);
        let be = bs + byte_offset(&self.text[bs..], e - s);
        let mut new_text = String::with_capacity(self.text.len() + edit.replacement.len());
        new_text.push_str(&self.text[..bs]);
        new_text.push_str(&edit.replacement);
        new_text.push_str(&self.text[be..]);

        let mut outcome = EditOutcome::default();
        let mut absorbed = false;
        let mut kept = Vec::with_capacity(self.segments.len());
        for mut seg in std::mem::take(&mut self.segments) {
            let CharRange { start: a, end: b } = seg.range;
            let overlapping = if s == e { a < s && s < b } else { a < e && s < b };
            if overlapping {
                let new_start = if !absorbed && a < s { a } else if absorbed { s + r } else { s };
                let new_end = if b > e { shift(b) } else { s + r };
                absorbed = true;
                seg.range = CharRange::new(new_start, new_end.max(new_start));
            } else if a >= e {
                seg.range = CharRange::new(shift(a), shift(b));
            }
            if seg.range.is_empty() {
                outcome.removed.push(seg.segment_id);
                continue;
            }
            let hash = content_hash(char_slice(&new_text, seg.range));
            if hash != seg.content_hash {
                outcome.touched.push(seg.segment_id.clone());
                seg.content_hash = hash;
            }
            kept.push(seg);
        }
        self.segments = kept;
        self.text = new_text;
        self.version += 1;
        self.events.push(DocEvent::Edited { edit: edit.clone(), removed: outcome.removed.clone() });
        Ok(outcome)
    }

    /// Replace the segment list. Input may be unsorted; it is stored sorted by
    /// start offset with every status reset to current.
    pub fn set_segments(&mut self, drafts: Vec<SegmentDraft>) -> Result<(), DocumentError> {
        let mut drafts = drafts;
        for d in &drafts {
            self.check_range(d.range)?;
            if d.range.is_empty() {
                return Err(DocumentError::EmptySegment(d.range));
            }
        }
        let next_version = self.version + 1;
        for (i, d) in drafts.iter_mut().enumerate() {
            if d.segment_id.is_none() {
                d.segment_id = Some(SegmentId(format!("seg-{next_version}-{i}")));
            }
        }
        let mut seen = BTreeSet::new();
        for d in &drafts {
            let id = d.segment_id.clone().expect("assigned above");
            if !seen.insert(id.clone()) {
                return Err(DocumentError::DuplicateSegment(id));
            }
        }
        drafts.sort_by_key(|d| (d.range.start, d.range.end));
        for pair in drafts.windows(2) {
            if pair[0].range.overlaps(&pair[1].range) {
                return Err(DocumentError::Overlap {
                    first: pair[0].segment_id.clone().unwrap(),
                    first_range: pair[0].range,
                    second: pair[1].segment_id.clone().unwrap(),
                    second_range: pair[1].range,
                });
            }
        }
        self.segments = drafts
            .iter()
            .map(|d| FacetSegment {
                segment_id: d.segment_id.clone().unwrap(),
                facet_type: d.facet_type,
                range: d.range,
                content_hash: content_hash(char_slice(&self.text, d.range)),
                status: SegmentStatus::Current,
            })
            .collect();
        self.version = next_version;
        self.events.push(DocEvent::SegmentsSet { segments: drafts });
        Ok(())
    }

    /// Set the status of the listed segments. All-or-nothing.
    pub fn flag_segments(
        &mut self,
        segment_ids: &BTreeSet<SegmentId>,
        status: SegmentStatus,
    ) -> Result<(), DocumentError> {
        if let Some(missing) = segment_ids.iter().find(|id| self.segment(id).is_none()) {
            return Err(DocumentError::UnknownSegment(missing.clone()));
        }
        for seg in &mut self.segments {
            if segment_ids.contains(&seg.segment_id) {
                seg.status = status;
            }
        }
        self.version += 1;
        self.events.push(DocEvent::Flagged { segment_ids: segment_ids.clone(), status });
        Ok(())
    }

    /// Rebuild a document by re-applying a log from its creation record.
    pub fn replay(events: &[DocEvent]) -> Result<IdeaDocument, DocumentError> {
        let mut iter = events.iter().enumerate();
        let mut doc = match iter.next() {
            Some((_, DocEvent::Created { doc_id, text })) => IdeaDocument::new(doc_id.clone(), text.clone()),
            _ => return Err(DocumentError::MissingCreation),
        };
        for (index, event) in iter {
            let res = match event {
                DocEvent::Created { .. } => Err(DocumentError::MissingCreation),
                DocEvent::Edited { edit, .. } => doc.apply_edit(edit).map(|_| ()),
                DocEvent::SegmentsSet { segments } => doc.set_segments(segments.clone()),
                DocEvent::Flagged { segment_ids, status } => doc.flag_segments(segment_ids, *status),
            };
            res.map_err(|e| DocumentError::Replay { index, source: Box::new(e) })?;
        }
        Ok(doc)
    }

    /// Check every structural invariant. Used by tests and after deserializing.
    pub fn validate(&self) -> Result<(), DocumentError> {
        let len = self.char_len();
        for seg in &self.segments {
            if seg.range.end > len || seg.range.start > seg.range.end {
                return Err(DocumentError::OutOfBounds { range: seg.range, len });
            }
            if seg.range.is_empty() {
                return Err(DocumentError::EmptySegment(seg.range));
            }
        }
        for pair in self.segments.windows(2) {
            if pair[0].range.start > pair[1].range.start || pair[0].range.overlaps(&pair[1].range) {
                return Err(DocumentError::Overlap {
                    first: pair[0].segment_id.clone(),
                    first_range: pair[0].range,
                    second: pair[1].segment_id.clone(),
                    second_range: pair[1].range,
                });
            }
        }
        Ok(())
    }

    /// True when every stored hash matches the text it covers.
    pub fn hashes_consistent(&self) -> bool {
        self.segments
            .iter()
            .all(|s| s.content_hash == content_hash(char_slice(&self.text, s.range)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const IDEA: &str = "Claims are hard to verify. We build a citation-hop dataset. We measure hop counts.";

    fn segmented() -> IdeaDocument {
        let mut doc = IdeaDocument::new("d", IDEA);
        doc.set_segments(vec![
            SegmentDraft::new(FacetType::Problem, CharRange::new(0, 26)),
            SegmentDraft::new(FacetType::Contribution, CharRange::new(27, 59)),
            SegmentDraft::new(FacetType::Evaluation, CharRange::new(60, 82)),
        ])
        .unwrap();
        doc
    }

    // Independent of apply_edit: slice by ranges and hash.
    fn oracle_hashes(doc: &IdeaDocument) -> Vec<String> {
        let chars: Vec<char> = doc.text().chars().collect();
        doc.segments()
            .iter()
            .map(|s| {
                let covered: String = chars[s.range.start..s.range.end].iter().collect();
                hex::encode(Sha256::digest(covered.as_bytes()))
            })
            .collect()
    }

    #[test]
    fn char_slice_uses_scalar_values() {
        let t = "αβγ δ";
        assert_eq!(char_slice(t, CharRange::new(1, 3)), "βγ");
        assert_eq!(char_len(t), 5);
    }

    #[test]
    fn insert_before_all_segments_shifts() {
        let mut doc = segmented();
        let before = doc.segments().to_vec();
        let out = doc.apply_edit(&EditOperation::insert(0, "Note ")).unwrap();
        assert!(out.touched.is_empty() && out.removed.is_empty());
        for (old, new) in before.iter().zip(doc.segments()) {
            assert_eq!(new.range, CharRange::new(old.range.start + 5, old.range.end + 5));
            assert_eq!(new.content_hash, old.content_hash);
            assert_eq!(new.status, old.status);
        }
    }

    #[test]
    fn identity_edit_only_bumps_version() {
        let mut doc = segmented();
        let before = doc.clone();
        doc.apply_edit(&EditOperation::insert(10, "")).unwrap();
        assert_eq!(doc.version(), before.version() + 1);
        assert_eq!(doc.text(), before.text());
        assert_eq!(doc.segments(), before.segments());
    }

    #[test]
    fn edit_inside_contribution_changes_only_its_hash() {
        let mut doc = segmented();
        let before = doc.segments().to_vec();
        // "build" -> "make" inside the contribution
        let edit = EditOperation::new(CharRange::new(30, 33), "mak");
        let out = doc.apply_edit(&edit).unwrap();
        assert_eq!(out.touched, vec![before[1].segment_id.clone()]);
        assert_eq!(oracle_hashes(&doc), doc.segments().iter().map(|s| s.content_hash.clone()).collect::<Vec<_>>());
        assert_eq!(doc.segments()[0].content_hash, before[0].content_hash);
        assert_ne!(doc.segments()[1].content_hash, before[1].content_hash);
        assert_eq!(doc.segments()[2].content_hash, before[2].content_hash);
    }

    #[test]
    fn out_of_bounds_edit_rejected_unchanged() {
        let mut doc = segmented();
        let before = doc.clone();
        let err = doc.apply_edit(&EditOperation::new(CharRange::new(80, 90), "x")).unwrap_err();
        assert!(matches!(err, DocumentError::OutOfBounds { .. }));
        assert_eq!(doc, before);
    }

    #[test]
    fn edit_spanning_two_segments_keeps_them_disjoint() {
        let mut doc = segmented();
        doc.apply_edit(&EditOperation::new(CharRange::new(20, 40), "XYZ")).unwrap();
        doc.validate().unwrap();
        assert!(doc.hashes_consistent());
        assert_eq!(doc.segments()[0].range, CharRange::new(0, 23));
        assert_eq!(doc.segments()[1].range.start, 23);
    }

    #[test]
    fn deleting_a_whole_segment_removes_it() {
        let mut doc = segmented();
        let id = doc.segments()[2].segment_id.clone();
        let out = doc.apply_edit(&EditOperation::new(CharRange::new(60, 82), "")).unwrap();
        assert_eq!(out.removed, vec![id]);
        assert_eq!(doc.segments().len(), 2);
    }

    #[test]
    fn set_segments_rejects_shared_character() {
        let mut doc = IdeaDocument::new("d", IDEA);
        let err = doc
            .set_segments(vec![
                SegmentDraft::new(FacetType::Problem, CharRange::new(0, 27)),
                SegmentDraft::new(FacetType::Contribution, CharRange::new(26, 59)),
            ])
            .unwrap_err();
        match err {
            DocumentError::Overlap { first_range, second_range, .. } => {
                assert_eq!(first_range, CharRange::new(0, 27));
                assert_eq!(second_range, CharRange::new(26, 59));
            }
            other => panic!("unexpected {other}"),
        }
        assert_eq!(doc.version(), 0);
    }

    #[test]
    fn set_segments_sorts_input() {
        let mut doc = IdeaDocument::new("d", IDEA);
        let ranges = [CharRange::new(60, 82), CharRange::new(0, 26), CharRange::new(27, 59)];
        doc.set_segments(ranges.iter().map(|r| SegmentDraft::new(FacetType::Problem, *r)).collect())
            .unwrap();
        let mut oracle = ranges.to_vec();
        oracle.sort();
        let stored: Vec<CharRange> = doc.segments().iter().map(|s| s.range).collect();
        assert_eq!(stored, oracle);
    }

    #[test]
    fn flag_unknown_id_applies_nothing() {
        let mut doc = segmented();
        let before = doc.clone();
        let ids: BTreeSet<_> = [doc.segments()[0].segment_id.clone(), SegmentId::new("nope")].into();
        assert!(doc.flag_segments(&ids, SegmentStatus::Stale).is_err());
        assert_eq!(doc, before);
    }

    #[test]
    fn flag_empty_set_only_bumps_version() {
        let mut doc = segmented();
        let before = doc.clone();
        doc.flag_segments(&BTreeSet::new(), SegmentStatus::Stale).unwrap();
        assert_eq!(doc.version(), before.version() + 1);
        assert_eq!(doc.segments(), before.segments());
    }

    #[test]
    fn stale_status_survives_edits_and_replay() {
        let mut doc = segmented();
        let ids: BTreeSet<_> = doc.segments()[..2].iter().map(|s| s.segment_id.clone()).collect();
        doc.flag_segments(&ids, SegmentStatus::Stale).unwrap();
        let old_hash = doc.segments()[1].content_hash.clone();
        doc.apply_edit(&EditOperation::new(CharRange::new(30, 33), "mak")).unwrap();
        assert_ne!(doc.segments()[1].content_hash, old_hash);
        assert_eq!(doc.segments()[1].status, SegmentStatus::Stale);
        assert_eq!(doc.segments()[2].status, SegmentStatus::Current);
        let replayed = IdeaDocument::replay(doc.events()).unwrap();
        assert_eq!(replayed, doc);
    }

    #[test]
    fn replay_requires_creation() {
        assert_eq!(IdeaDocument::replay(&[]), Err(DocumentError::MissingCreation));
    }
}
