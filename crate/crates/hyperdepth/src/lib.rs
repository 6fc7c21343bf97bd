//! Corpus tooling for measuring hypernym direction from article structure.
//!
//! The pipeline: ingest a MediaWiki XML dump into a canonical corpus
//! ([`ingest`]), build a phrase-retrieval index over it ([`index`]), compute
//! a structural depth score per word ([`depth`]) and heading-based meaning
//! sets ([`headings`]), combine both into per-pair scores ([`scoring`]), and
//! evaluate against labelled datasets ([`eval`]).

pub mod config;
pub mod corpus;
pub mod depth;
pub mod error;
pub mod eval;
pub mod headings;
pub mod index;
pub mod ingest;
pub mod scoring;

pub use error::{Error, Result};
