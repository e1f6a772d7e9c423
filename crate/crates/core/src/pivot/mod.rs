//! Literature-grounded facet assessments.

mod assess;
mod graph;

pub use assess::*;
pub use graph::*;

use std::collections::BTreeSet;

use thiserror::Error;

use crate::document::{DocumentError, FacetType, SegmentId};
use crate::gateway::GatewayError;

#[derive(Debug, Error)]
pub enum PivotError {
    #[error("no papers selected")]
    EmptySelection,
    #[error("missing facets: {}", .0.iter().map(|f| f.as_str()).collect::<Vec<_>>().join(", "))]
    MissingFacets(BTreeSet<FacetType>),
    #[error("unknown segment {0}")]
    UnknownSegment(SegmentId),
    #[error("segment {0} is not a {1} segment")]
    WrongFacet(SegmentId, FacetType),
    #[error(transparent)]
    Document(#[from] DocumentError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}
