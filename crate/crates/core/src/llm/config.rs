use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::http::DEFAULT_BASE_URL;

/// How the rendered prompt is split into chat messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageLayout {
    /// Opening instruction sentence as the system message, the rest as user.
    #[default]
    SystemAndUser,
    /// The whole prompt as a single user message.
    UserOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmConfig {
    pub model_name: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub base_url: String,
    #[serde(with = "duration_secs")]
    pub timeout: Duration,
    pub max_retries: u32,
    /// First backoff delay; attempt `n` waits `retry_base_delay * 2^n`.
    #[serde(with = "duration_secs")]
    pub retry_base_delay: Duration,
    pub parallelism: usize,
    pub message_layout: MessageLayout,
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig {
            model_name: "gpt-4o".to_owned(),
            temperature: 0.0,
            max_output_tokens: 128,
            base_url: DEFAULT_BASE_URL.to_owned(),
            timeout: Duration::from_secs(60),
            max_retries: 3,
            retry_base_delay: Duration::from_secs(1),
            parallelism: 4,
            message_layout: MessageLayout::SystemAndUser,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("parallelism must be at least 1")]
    Parallelism,
    #[error("temperature must be a finite value >= 0, got {0}")]
    Temperature(f64),
    #[error("max_output_tokens must be positive")]
    MaxTokens,
}

impl LlmConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.parallelism == 0 {
            return Err(ConfigError::Parallelism);
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(ConfigError::Temperature(self.temperature));
        }
        if self.max_output_tokens == 0 {
            return Err(ConfigError::MaxTokens);
        }
        Ok(())
    }

    /// Delay before retry number `attempt` (0-based).
    pub fn backoff(&self, attempt: u32) -> Duration {
        self.retry_base_delay.saturating_mul(1 << attempt.min(16))
    }
}

mod duration_secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let secs = f64::deserialize(d)?;
        Duration::try_from_secs_f64(secs).map_err(serde::de::Error::custom)
    }
}
