//! Aspect-centric opinion summarization for product review corpora.
//!
//! The library turns a corpus of customer reviews into an attributable,
//! extractive summary in a sequence of batch stages:
//!
//! 1. induce an initial aspect taxonomy for the product category,
//! 2. extract (aspect, sentiment, evidence) arguments from each review
//!    through an LLM backend, growing the taxonomy as new aspects appear,
//! 3. unify aspect wording by clustering aspect strings,
//! 4. cluster arguments whose evidence is semantically close,
//! 5. pick each cluster's representative evidence with a weighted PageRank
//!    over the cluster's sentence-similarity graph,
//! 6. score clusters by sentiment agreement among same-aspect arguments,
//! 7. select the top-N unique evidence pieces as the summary, and
//! 8. evaluate the summary (ROUGE and a sentence-diversity score).
//!
//! Every stage is a pure function of its inputs, persisted as line-delimited
//! JSON, and deterministic under the bundled mock backend and hashed local
//! embedder, so full runs are reproducible byte for byte.

pub mod clustering;
pub mod config;
pub mod domain;
pub mod embedding;
pub mod extraction;
pub mod metrics;
pub mod pipeline;
pub mod scoring;
pub mod textrank;

pub use config::PipelineConfig;
pub use domain::{
    Argument, AspectTaxonomy, EvidenceCluster, Review, Sentiment, Summary, SummaryItem,
};
pub use pipeline::{run_pipeline, PipelineError};
