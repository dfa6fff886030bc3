//! Semantic shot selection: embedding providers and an exhaustive cosine
//! top-k index over labelled training tweets.

mod index;
mod provider;

pub use index::{
    build_index, EmbeddedExample, ExampleIndexOf, IndexBuild, RetrievalError, ScoredExample, INDEX_FORMAT,
    UNIT_NORM_TOLERANCE,
};
pub use provider::{
    hash_provider, EmbedError, EmbeddingProvider, HashProvider, RemoteEmbeddingConfig, RemoteEmbeddingProvider,
    HASH_PROVIDER_MIN_DIMENSION,
};
