pub mod config;
pub mod corpus;
pub mod document;
pub mod facets;
pub mod gateway;
pub mod organizer;
pub mod pivot;
pub mod session;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/documents.md")]
    mod documents {}
    #[doc = include_str!("../../../book/src/gateway.md")]
    mod gateway {}
    #[doc = include_str!("../../../book/src/corpus.md")]
    mod corpus {}
    #[doc = include_str!("../../../book/src/organizing.md")]
    mod organizing {}
    #[doc = include_str!("../../../book/src/novelty.md")]
    mod novelty {}
    #[doc = include_str!("../../../book/src/evidence.md")]
    mod evidence {}
    #[doc = include_str!("../../../book/src/service.md")]
    mod service {}
}
