//! Query-variant experiments over a lexical search engine.
//!
//! The pipeline: build prompts from topics and collect synthetic query
//! variants ([`querygen`]), rank documents for each variant with BM25
//! ([`retrieval`]), combine the rankings with reciprocal rank fusion
//! ([`fusion`]) and score everything against relevance judgments
//! ([`metrics`]). [`trecio`] reads and writes the interchange formats and
//! [`synthfixture`] builds small seeded collections for offline testing.

pub mod analyzer;
pub mod error;
pub mod fusion;
pub mod index;
pub mod metrics;
pub mod querygen;
pub mod retrieval;
pub mod synthfixture;
pub mod trecio;
pub mod warning;

pub use error::{Error, Result};
pub use warning::Warning;
