//! Evaluation toolkit for ergonomic-risk VQA and image captioning.
//!
//! The library is organized around the assessment pipeline:
//!
//! - [`dataset`]: the image-text-pair dataset format, validation, the
//!   seeded fine-tune/test split, and the canonical task prompts.
//! - [`textproc`]: tokenization, n-grams, Porter stemming and term vectors.
//! - [`metrics`]: the nine caption-similarity metrics behind a runtime
//!   [`metrics::MetricRegistry`].
//! - [`riskmodel`]: n-gram language models, perplexity, and the two-class
//!   perplexity risk classifier.
//! - [`model_client`]: pluggable inference backends (remote HTTP or a
//!   deterministic stub) with caching and bounded concurrency.
//! - [`evaluation`]: VQA accuracy, per-image caption scores, agreement
//!   statistics, paired model comparison and report rendering.
//! - [`survey`]: questionnaire planning and human-evaluation analytics.

pub mod dataset;
pub mod evaluation;
pub mod metrics;
pub mod model_client;
pub mod riskmodel;
pub mod survey;
pub mod textproc;
