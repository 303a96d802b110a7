//! Similar-sentence retrieval and ranking.
//!
//! The crate implements a two-stage retrieval engine over a sentence corpus:
//! lexical baselines (BM25 and a sequential-dependence scorer), pooled
//! sentence embeddings with nearest-neighbor indexes (flat and coarse-
//! quantized), a trainable linear projection fitted with a tied-weight
//! cosine objective, pair-scorer reranking of result heads, weighted rank
//! fusion, and graded-relevance evaluation with run-file round-tripping.
//!
//! Modules are layered bottom-up: [`corpus`] feeds [`lexical`] and
//! [`embed`]; pooled vectors feed [`annindex`] and [`siamese`]; rankings
//! from any stage flow through [`rerank`], [`fuse`], and [`eval`]. The
//! [`pipeline`] module wires whole systems together, and [`synth`] fabricates
//! controlled corpora for end-to-end checks.

pub mod annindex;
pub mod config;
pub mod corpus;
pub mod embed;
pub mod error;
pub mod eval;
pub mod format;
pub mod fuse;
pub mod lexical;
pub mod pipeline;
pub mod ranked;
pub mod rerank;
pub mod seeded;
pub mod siamese;
pub mod synth;

pub use error::{Error, Result};
