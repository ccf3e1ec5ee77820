//! Query reformulation for concept location.
//!
//! Given a natural-language query and a source corpus, the engine searches
//! the corpus, mines method and field signatures from the top results, ranks
//! the identifier terms with a PageRank-style weighting over a term
//! co-occurrence graph, and picks the most promising expansion with a bagged
//! CART model trained on query-quality metrics.

pub mod cli;
pub mod config;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod extract;
pub mod graph;
pub mod index;
pub mod learner;
pub mod pipeline;
pub mod quality;

pub use error::{Error, Result};
