use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use super::backend::{BackendError, ChatBackend, ChatRequest};
use crate::corpus::{load_label_table, DatasetError, LabelVector, TweetIndex};
use crate::http::HttpError;

/// What the mock answers.
#[derive(Debug, Clone, PartialEq)]
pub enum MockBehavior {
    /// Labels looked up by tweet index.
    EchoFixture(HashMap<TweetIndex, LabelVector>),
    /// The same vector for every tweet.
    Constant(LabelVector),
    /// The labels of the first shot rendered in the prompt; the all-zero
    /// vector when the prompt has no shots.
    NearestShotLabels,
    /// A fixed raw response string.
    Fixed(String),
}

impl MockBehavior {
    /// Echo fixture read from any TSV with `index` and `labels` columns.
    pub fn echo_from_file(path: impl AsRef<Path>) -> Result<Self, DatasetError> {
        Ok(MockBehavior::EchoFixture(load_label_table(path)?.into_iter().collect()))
    }
}

/// Deterministic in-process chat endpoint with a call counter.
pub struct MockLlm {
    behavior: MockBehavior,
    calls: AtomicUsize,
    failures: HashMap<TweetIndex, u16>,
    /// Remaining transient failures per tweet before it succeeds.
    flaky: Mutex<HashMap<TweetIndex, u32>>,
    delay: Option<Box<dyn Fn(TweetIndex) -> Duration + Send + Sync>>,
}

impl MockLlm {
    pub fn new(behavior: MockBehavior) -> Self {
        MockLlm {
            behavior,
            calls: AtomicUsize::new(0),
            failures: HashMap::new(),
            flaky: Mutex::new(HashMap::new()),
            delay: None,
        }
    }

    /// Always answer `status` for this tweet.
    pub fn failing(mut self, index: TweetIndex, status: u16) -> Self {
        self.failures.insert(index, status);
        self
    }

    /// Answer HTTP 503 `times` times for this tweet, then behave normally.
    pub fn flaky(self, index: TweetIndex, times: u32) -> Self {
        self.flaky.lock().expect("flaky lock").insert(index, times);
        self
    }

    /// Sleep before answering, per tweet.
    pub fn with_delay(mut self, delay: impl Fn(TweetIndex) -> Duration + Send + Sync + 'static) -> Self {
        self.delay = Some(Box::new(delay));
        self
    }

    /// Requests received so far, including failed ones.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn reset_calls(&self) {
        self.calls.store(0, Ordering::SeqCst);
    }
}

/// Labels of the first `Labels:` line that follows the examples header.
pub fn first_shot_labels(prompt: &str) -> Option<&str> {
    let header = crate::prompting::TEMPLATE.examples_header;
    let after = &prompt[prompt.find(header)? + header.len()..];
    after
        .lines()
        .find_map(|line| line.strip_prefix("Labels:"))
        .map(str::trim)
}

impl ChatBackend for MockLlm {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let index = request.tweet_index;
        if let Some(delay) = &self.delay {
            std::thread::sleep(delay(index));
        }
        if let Some(&status) = self.failures.get(&index) {
            return Err(HttpError::Status {
                status,
                body: "mock failure".into(),
            }
            .into());
        }
        {
            let mut flaky = self.flaky.lock().expect("flaky lock");
            if let Some(remaining) = flaky.get_mut(&index).filter(|r| **r > 0) {
                *remaining -= 1;
                return Err(HttpError::Status {
                    status: 503,
                    body: "mock transient failure".into(),
                }
                .into());
            }
        }
        match &self.behavior {
            MockBehavior::EchoFixture(labels) => labels
                .get(&index)
                .map(LabelVector::canonical)
                .ok_or(BackendError::FixtureMissing(index)),
            MockBehavior::Constant(v) => Ok(v.canonical()),
            MockBehavior::NearestShotLabels => Ok(first_shot_labels(&request.prompt_text())
                .map(str::to_owned)
                .unwrap_or_else(|| LabelVector::NONE.canonical())),
            MockBehavior::Fixed(raw) => Ok(raw.clone()),
        }
    }
}
