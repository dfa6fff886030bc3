//! Minimal blocking JSON-over-HTTP client shared by the chat and embedding
//! backends.

use std::time::Duration;

use reqwest::blocking::Client;
use serde_json::Value;
use thiserror::Error;
use tracing::debug;

/// Environment variable holding the API base URL.
pub const BASE_URL_ENV: &str = "OPENAI_BASE_URL";
/// Environment variable holding the bearer token.
pub const API_KEY_ENV: &str = "OPENAI_API_KEY";
pub const DEFAULT_BASE_URL: &str = "https://api.openai.com/v1";

#[derive(Debug, Error)]
pub enum HttpError {
    #[error("request timed out")]
    Timeout,
    #[error("HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("connection failed: {0}")]
    Connect(String),
    #[error("invalid response body: {0}")]
    Decode(String),
    #[error("client setup failed: {0}")]
    Setup(String),
}

impl HttpError {
    /// Timeouts, 429 and 5xx are worth retrying; everything else is not.
    pub fn is_transient(&self) -> bool {
        match self {
            HttpError::Timeout => true,
            HttpError::Status { status, .. } => *status == 429 || (500..600).contains(status),
            _ => false,
        }
    }

    pub fn is_auth(&self) -> bool {
        matches!(self, HttpError::Status { status: 401 | 403, .. })
    }
}

pub struct HttpClient {
    base_url: String,
    api_key: Option<String>,
    client: Client,
}

/// Replace the bearer token in a string with a fixed marker.
pub fn redact(text: &str, secret: Option<&str>) -> String {
    match secret {
        Some(s) if !s.is_empty() => text.replace(s, "***"),
        _ => text.to_owned(),
    }
}

impl HttpClient {
    pub fn new(base_url: &str, api_key: Option<String>, timeout: Duration) -> Result<Self, HttpError> {
        let client = Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| HttpError::Setup(e.to_string()))?;
        Ok(HttpClient {
            base_url: base_url.trim_end_matches('/').to_owned(),
            api_key,
            client,
        })
    }

    pub fn post_json(&self, path: &str, body: &Value) -> Result<Value, HttpError> {
        let url = format!("{}/{}", self.base_url, path.trim_start_matches('/'));
        let key = self.api_key.as_deref();
        debug!(
            url = %url,
            authorization = if key.is_some() { "Bearer ***" } else { "none" },
            body = %redact(&body.to_string(), key),
            "POST"
        );
        let mut request = self.client.post(&url).json(body);
        if let Some(key) = key {
            request = request.bearer_auth(key);
        }
        let response = request.send().map_err(classify)?;
        let status = response.status();
        let text = response.text().map_err(classify)?;
        debug!(status = status.as_u16(), body = %redact(&text, key), "response");
        if !status.is_success() {
            return Err(HttpError::Status {
                status: status.as_u16(),
                body: redact(&text, key),
            });
        }
        serde_json::from_str(&text).map_err(|e| HttpError::Decode(e.to_string()))
    }
}

fn classify(err: reqwest::Error) -> HttpError {
    if err.is_timeout() {
        HttpError::Timeout
    } else if let Some(status) = err.status() {
        HttpError::Status {
            status: status.as_u16(),
            body: String::new(),
        }
    } else if err.is_decode() {
        HttpError::Decode(err.to_string())
    } else {
        HttpError::Connect(err.to_string())
    }
}
