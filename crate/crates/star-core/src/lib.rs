//! Semantic vector spaces over text corpora via sparse ternary random
//! indexing.
//!
//! The pipeline: tokenize a corpus ([`corpus`]), give every significant term
//! a deterministic sparse ternary seed vector ([`seedspace`]), accumulate
//! sentence-context sums into dense per-term semantic vectors ([`embedder`]),
//! then compare, cluster and summarize in the resulting low-dimensional
//! Euclidean space ([`simeng`], [`analytics`]). Indexes persist to a small
//! directory bundle ([`store`]).

pub mod analytics;
pub mod corpus;
pub mod embedder;
pub mod error;
pub mod seedspace;
pub mod simeng;
pub mod store;

pub use error::{Error, Result};
