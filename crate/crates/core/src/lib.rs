//! Scientific web discourse detection for tweets.
//!
//! Tweets are labelled for three categories (scientific claim, reference to
//! a study or publication, mention of a scientific entity). A fine-tuned
//! encoder supplies Categories 1 and 3; a chat model prompted with
//! semantically retrieved training shots supplies Category 2. The crate
//! covers dataset ingestion, shot retrieval, prompting, the cached LLM
//! gateway, ensemble routing and macro-F1 scoring.
//!
//! Metric and retrieval code is generic over the scalar type; the aliases
//! below fix the types used by the pipeline.

pub mod corpus;
pub mod ensemble;
pub mod http;
pub mod llm;
pub mod metrics;
pub mod prompting;
pub mod retrieval;
pub mod scalar;

pub use scalar::Scalar;

/// Embedding component type used by the pipeline.
pub type Embedding = f64;

/// Example index over `f64` embeddings.
pub type ExampleIndex = retrieval::ExampleIndexOf<Embedding>;

/// Retrieved shot with an `f64` similarity.
pub type ScoredExample = retrieval::ScoredExample<Embedding>;

/// Metrics computed in `f64`.
pub type MetricsReport = metrics::MetricsReportOf<f64>;

/// Metrics computed in exact rationals.
pub type ExactMetricsReport = metrics::MetricsReportOf<num_rational::Ratio<i64>>;
