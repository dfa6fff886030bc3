use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

use super::config::{LlmConfig, MessageLayout};
use crate::corpus::TweetIndex;
use crate::http::{HttpClient, HttpError};
use crate::prompting::RenderedPrompt;

/// A chat completion request for one tweet.
#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    /// Not sent on the wire; lets test doubles key their answers.
    pub tweet_index: TweetIndex,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub messages: Vec<ChatMessage>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChatMessage {
    pub role: &'static str,
    pub content: String,
}

impl ChatRequest {
    pub fn new(tweet_index: TweetIndex, prompt: &RenderedPrompt, cfg: &LlmConfig) -> Self {
        let messages = match cfg.message_layout {
            MessageLayout::SystemAndUser => vec![
                ChatMessage {
                    role: "system",
                    content: prompt.system.clone(),
                },
                ChatMessage {
                    role: "user",
                    content: prompt.user.clone(),
                },
            ],
            MessageLayout::UserOnly => vec![ChatMessage {
                role: "user",
                content: prompt.full_text.clone(),
            }],
        };
        ChatRequest {
            tweet_index,
            model: cfg.model_name.clone(),
            temperature: cfg.temperature,
            max_tokens: cfg.max_output_tokens,
            messages,
        }
    }

    /// OpenAI chat-completions request body.
    pub fn wire_body(&self) -> Value {
        serde_json::json!({
            "model": self.model,
            "messages": self.messages,
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        })
    }

    /// Concatenated message contents.
    pub fn prompt_text(&self) -> String {
        self.messages
            .iter()
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error(transparent)]
    Http(#[from] HttpError),
    #[error("unexpected response shape: {0}")]
    Protocol(String),
    #[error("mock fixture has no entry for tweet {0}")]
    FixtureMissing(TweetIndex),
}

impl BackendError {
    pub fn is_transient(&self) -> bool {
        matches!(self, BackendError::Http(e) if e.is_transient())
    }

    pub fn is_auth(&self) -> bool {
        matches!(self, BackendError::Http(e) if e.is_auth())
    }
}

/// Something that answers chat requests with the assistant's text.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError>;
}

/// Extract `choices[0].message.content` from a chat-completions response.
pub fn response_content(body: &Value) -> Result<String, BackendError> {
    body.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_owned)
        .ok_or_else(|| BackendError::Protocol(format!("missing choices[0].message.content in {body}")))
}

/// Client for an OpenAI-compatible `POST {base}/chat/completions` endpoint.
pub struct OpenAiChatClient {
    http: HttpClient,
}

impl OpenAiChatClient {
    pub fn new(cfg: &LlmConfig, api_key: Option<String>) -> Result<Self, HttpError> {
        Ok(OpenAiChatClient {
            http: HttpClient::new(&cfg.base_url, api_key, cfg.timeout)?,
        })
    }
}

impl ChatBackend for OpenAiChatClient {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        let body = self.http.post_json("chat/completions", &request.wire_body())?;
        response_content(&body)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Tweet;
    use crate::prompting::render_zero_shot;

    #[test]
    fn wire_body_shape() {
        let prompt = render_zero_shot(&Tweet::new(4, "hello"));
        let req = ChatRequest::new(TweetIndex(4), &prompt, &LlmConfig::default());
        let body = req.wire_body();
        assert_eq!(body["model"], "gpt-4o");
        assert_eq!(body["temperature"], 0.0);
        assert_eq!(body["max_tokens"], 128);
        assert_eq!(body["messages"][0]["role"], "system");
        assert_eq!(body["messages"][0]["content"], prompt.system.as_str());
        assert_eq!(body["messages"][1]["content"], prompt.user.as_str());
        assert_eq!(req.prompt_text(), prompt.full_text);

        let single = LlmConfig { message_layout: MessageLayout::UserOnly, ..LlmConfig::default() };
        let req = ChatRequest::new(TweetIndex(4), &prompt, &single);
        assert_eq!(req.messages.len(), 1);
        assert_eq!(req.messages[0].content, prompt.full_text);
    }

    #[test]
    fn content_extraction() {
        let body = serde_json::json!({"choices": [{"message": {"role": "assistant", "content": "[1, 0, 0]"}}]});
        assert_eq!(response_content(&body).unwrap(), "[1, 0, 0]");
        assert!(matches!(response_content(&serde_json::json!({})), Err(BackendError::Protocol(_))));
    }
}
