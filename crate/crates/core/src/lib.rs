//! Literature-aware novelty assessment pipeline.
//!
//! The crate is organized around the stages of the pipeline:
//!
//! - [`gateway`] — one abstraction over all model inference (chat, embeddings,
//!   NLI) with live OpenAI-compatible HTTP backends and a deterministic,
//!   network-free mock backend driven by fixtures and a seed.
//! - [`benchmark`] — turns per-submission human review sets into paper-level
//!   aggregated novelty assessments with normalized scores, plus the
//!   embedding-based quality check and JSON-lines persistence.
//! - [`knowledge`] — maps manuscript or candidate-paper text to the structured
//!   knowledge tuple (core ideas, methods, contributions, data sources,
//!   experimental components).
//! - [`retrieval`] — builds one search query per descriptor, talks to a
//!   scholarly-search HTTP API with caching and rate limiting, and produces
//!   the deduplicated candidate union.
//! - [`graph`] — embeds structured knowledge, computes cosine similarities,
//!   builds the manuscript-centered knowledge graph, ranks the top-k
//!   candidates, derives overlap profiles, and raises the idea-level
//!   plagiarism flag.
//! - [`assessor`] — assembles the inference-time prompt, invokes the novelty
//!   model endpoint, parses score + justification, and applies the overlap
//!   policy.
//! - [`report`] — compiles and renders the originality report (stable text
//!   layout and a versioned structured document).
//! - [`evaluation`] — classification metrics over the four-class novelty
//!   scale, Pearson correlation, the entailment-minus-contradiction NLI
//!   metric, the LLM-judge protocol, and score-distribution exports.
//! - [`pipeline`] — orchestration used by the CLI: end-to-end assess,
//!   benchmark construction, and prediction evaluation.

pub mod assessor;
pub mod benchmark;
pub mod config;
pub mod evaluation;
pub mod gateway;
pub mod graph;
pub mod knowledge;
pub mod pipeline;
pub mod prompts;
pub mod report;
pub mod retrieval;
pub mod score;
pub mod transport;

/// Version stamped into every persisted document (benchmark lines, quality
/// reports, cache entries, fixtures, structured reports, metric summaries).
pub const SCHEMA_VERSION: u32 = 1;

pub use score::NoveltyScore;
