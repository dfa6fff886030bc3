//! Chat-model gateway: OpenAI-compatible client, persistent response cache,
//! retrying batch execution and an offline mock backend.

mod backend;
mod cache;
mod config;
mod gateway;
mod mock;

pub use backend::{response_content, BackendError, ChatBackend, ChatMessage, ChatRequest, OpenAiChatClient};
pub use cache::{cache_key, CacheEntry, CacheError, CacheStats, ResponseCache};
pub use config::{ConfigError, LlmConfig, MessageLayout};
pub use gateway::{
    BatchError, BatchOutcome, ClassifyError, ClassifyErrorKind, Gateway, LlmPrediction, ShotSource,
};
pub use mock::{first_shot_labels, MockBehavior, MockLlm};
