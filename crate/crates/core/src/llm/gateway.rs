use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use num_traits::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::{debug, info, warn};

use super::backend::{BackendError, ChatBackend, ChatRequest};
use super::cache::{cache_key, CacheError, CacheStats, ResponseCache};
use super::config::{ConfigError, LlmConfig};
use crate::corpus::{Dataset, LabelVector, Tweet, TweetIndex};
use crate::prompting::{parse_label_response, render_few_shot, render_zero_shot, PromptError, PromptMode, RenderedPrompt};
use crate::retrieval::{EmbeddingProvider, ExampleIndexOf, RetrievalError, ScoredExample};

/// A parsed model answer for one tweet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmPrediction {
    pub tweet_index: TweetIndex,
    /// Parsed labels, or the all-zero fallback when `parse_ok` is false.
    pub labels: LabelVector,
    pub raw_response: String,
    pub parse_ok: bool,
    pub from_cache: bool,
    pub prompt_hash: String,
    pub shot_indices: Vec<TweetIndex>,
}

impl LlmPrediction {
    fn from_response(tweet_index: TweetIndex, prompt: &RenderedPrompt, raw_response: String, from_cache: bool) -> Self {
        let (labels, parse_ok) = match parse_label_response(&raw_response) {
            Ok(labels) => (labels, true),
            Err(_) => {
                warn!(tweet = %tweet_index, "unparseable response, using all-negative fallback");
                (LabelVector::NONE, false)
            }
        };
        LlmPrediction {
            tweet_index,
            labels,
            raw_response,
            parse_ok,
            from_cache,
            prompt_hash: prompt.content_hash.clone(),
            shot_indices: prompt.shot_indices.clone(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ClassifyErrorKind {
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("shot retrieval failed: {0}")]
    Retrieval(#[from] RetrievalError),
    #[error("request failed after {attempts} attempt(s): {source}")]
    Transport {
        attempts: u32,
        #[source]
        source: BackendError,
    },
    #[error("authentication rejected: {0}")]
    Auth(#[source] BackendError),
    #[error(transparent)]
    Cache(#[from] CacheError),
}

#[derive(Debug, Error)]
#[error("tweet {tweet_index}: {kind}")]
pub struct ClassifyError {
    pub tweet_index: TweetIndex,
    #[source]
    pub kind: ClassifyErrorKind,
}

/// Errors that stop a whole batch.
#[derive(Debug, Error)]
pub enum BatchError {
    #[error("aborting batch, authentication rejected at tweet {tweet_index}: {source}")]
    Auth {
        tweet_index: TweetIndex,
        #[source]
        source: BackendError,
    },
    #[error("aborting batch, cache write failed: {0}")]
    Cache(#[source] CacheError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("few-shot mode needs an example index")]
    MissingShots,
}

/// Where few-shot examples come from.
pub struct ShotSource<'a, F> {
    pub index: &'a ExampleIndexOf<F>,
    pub provider: &'a dyn EmbeddingProvider<F>,
    pub k: usize,
    /// Skip a stored example whose index equals the query tweet's.
    pub leave_one_out: bool,
}

impl<F: Float> ShotSource<'_, F> {
    pub fn shots_for(&self, tweet: &Tweet) -> Result<Vec<ScoredExample<F>>, RetrievalError> {
        let exclude = self.leave_one_out.then_some(tweet.index);
        self.index.top_k_excluding(&tweet.text, self.k, self.provider, exclude)
    }
}

/// Result of classifying a dataset.
#[derive(Debug)]
pub struct BatchOutcome {
    /// Successful predictions in dataset order.
    pub predictions: Vec<LlmPrediction>,
    /// Tweets that could not be classified, in dataset order.
    pub failures: Vec<ClassifyError>,
    pub cache: CacheStats,
}

impl BatchOutcome {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Cached, retrying front end to a chat backend.
pub struct Gateway {
    backend: Arc<dyn ChatBackend>,
    cache: ResponseCache,
    cfg: LlmConfig,
}

struct Pending {
    position: usize,
    tweet_index: TweetIndex,
    prompt: RenderedPrompt,
}

impl Gateway {
    pub fn new(backend: Arc<dyn ChatBackend>, cache: ResponseCache, cfg: LlmConfig) -> Result<Self, ConfigError> {
        cfg.validate()?;
        Ok(Gateway { backend, cache, cfg })
    }

    pub fn config(&self) -> &LlmConfig {
        &self.cfg
    }

    pub fn cache(&self) -> &ResponseCache {
        &self.cache
    }

    fn render<F: Float>(
        &self,
        tweet: &Tweet,
        mode: PromptMode,
        shots: Option<&[ScoredExample<F>]>,
    ) -> Result<RenderedPrompt, ClassifyErrorKind> {
        Ok(match mode {
            PromptMode::ZeroShot => render_zero_shot(tweet),
            PromptMode::FewShot => render_few_shot(tweet, shots.unwrap_or_default())?,
        })
    }

    fn lookup(&self, prompt: &RenderedPrompt) -> Option<String> {
        let key = cache_key(&self.cfg.model_name, self.cfg.temperature, &prompt.content_hash);
        self.cache.get(&key).map(|e| e.response)
    }

    fn fetch(&self, tweet_index: TweetIndex, prompt: &RenderedPrompt) -> Result<String, ClassifyErrorKind> {
        let request = ChatRequest::new(tweet_index, prompt, &self.cfg);
        let mut attempt = 0;
        let response = loop {
            match self.backend.complete(&request) {
                Ok(text) => break text,
                Err(e) if e.is_auth() => return Err(ClassifyErrorKind::Auth(e)),
                Err(e) if e.is_transient() && attempt < self.cfg.max_retries => {
                    let delay = self.cfg.backoff(attempt);
                    debug!(tweet = %tweet_index, attempt, ?delay, "transient failure, retrying: {e}");
                    std::thread::sleep(delay);
                    attempt += 1;
                }
                Err(source) => {
                    return Err(ClassifyErrorKind::Transport {
                        attempts: attempt + 1,
                        source,
                    })
                }
            }
        };
        let entry = self.cache.insert(
            &self.cfg.model_name,
            self.cfg.temperature,
            &prompt.content_hash,
            response,
        )?;
        Ok(entry.response)
    }

    fn classify_prompt(&self, tweet_index: TweetIndex, prompt: &RenderedPrompt) -> Result<LlmPrediction, ClassifyErrorKind> {
        if let Some(hit) = self.lookup(prompt) {
            return Ok(LlmPrediction::from_response(tweet_index, prompt, hit, true));
        }
        let response = self.fetch(tweet_index, prompt)?;
        Ok(LlmPrediction::from_response(tweet_index, prompt, response, false))
    }

    /// Classify one tweet. Few-shot mode requires `shots`.
    pub fn classify_tweet<F: Float>(
        &self,
        tweet: &Tweet,
        mode: PromptMode,
        shots: Option<&[ScoredExample<F>]>,
    ) -> Result<LlmPrediction, ClassifyError> {
        let wrap = |kind| ClassifyError {
            tweet_index: tweet.index,
            kind,
        };
        let prompt = self.render(tweet, mode, shots).map_err(wrap)?;
        self.classify_prompt(tweet.index, &prompt).map_err(wrap)
    }

    /// Classify every tweet of a dataset with at most `parallelism` requests
    /// in flight. Output follows dataset order. Per-tweet failures are
    /// collected; an authentication failure aborts the batch.
    pub fn classify_batch<F: Float>(
        &self,
        ds: &Dataset,
        mode: PromptMode,
        shots: Option<&ShotSource<'_, F>>,
    ) -> Result<BatchOutcome, BatchError> {
        if mode == PromptMode::FewShot && shots.is_none() {
            return Err(BatchError::MissingShots);
        }
        let before = self.cache.stats();
        let total = ds.len();
        let mut slots: Vec<Option<Result<LlmPrediction, ClassifyError>>> = (0..total).map(|_| None).collect();
        let mut pending = Vec::new();

        for (position, tweet) in ds.tweets().enumerate() {
            let prepared = match (mode, shots) {
                (PromptMode::FewShot, Some(source)) => source
                    .shots_for(tweet)
                    .map_err(ClassifyErrorKind::from)
                    .and_then(|s| self.render(tweet, mode, Some(&s))),
                _ => self.render::<F>(tweet, mode, None),
            };
            match prepared {
                Ok(prompt) => match self.lookup(&prompt) {
                    Some(hit) => {
                        slots[position] = Some(Ok(LlmPrediction::from_response(tweet.index, &prompt, hit, true)));
                    }
                    None => pending.push(Pending {
                        position,
                        tweet_index: tweet.index,
                        prompt,
                    }),
                },
                Err(kind) => {
                    slots[position] = Some(Err(ClassifyError {
                        tweet_index: tweet.index,
                        kind,
                    }))
                }
            }
        }
        info!(total, cached = total - pending.len(), to_request = pending.len(), "classifying batch");

        let cursor = AtomicUsize::new(0);
        let done = AtomicUsize::new(0);
        let abort = AtomicBool::new(false);
        let fatal: Mutex<Option<BatchError>> = Mutex::new(None);
        let results = Mutex::new(Vec::with_capacity(pending.len()));
        let report_every = (pending.len() / 10).max(1);
        let workers = self.cfg.parallelism.min(pending.len());

        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    if abort.load(Ordering::SeqCst) {
                        break;
                    }
                    let i = cursor.fetch_add(1, Ordering::SeqCst);
                    let Some(job) = pending.get(i) else { break };
                    let outcome = self
                        .fetch(job.tweet_index, &job.prompt)
                        .map(|r| LlmPrediction::from_response(job.tweet_index, &job.prompt, r, false));
                    match outcome {
                        Err(ClassifyErrorKind::Auth(source)) => {
                            abort.store(true, Ordering::SeqCst);
                            fatal.lock().expect("fatal lock").get_or_insert(BatchError::Auth {
                                tweet_index: job.tweet_index,
                                source,
                            });
                        }
                        Err(ClassifyErrorKind::Cache(e)) => {
                            abort.store(true, Ordering::SeqCst);
                            fatal.lock().expect("fatal lock").get_or_insert(BatchError::Cache(e));
                        }
                        other => {
                            let result = other.map_err(|kind| ClassifyError {
                                tweet_index: job.tweet_index,
                                kind,
                            });
                            results.lock().expect("results lock").push((job.position, result));
                        }
                    }
                    let n = done.fetch_add(1, Ordering::SeqCst) + 1;
                    if n.is_multiple_of(report_every) || n == pending.len() {
                        info!("requested {n}/{}", pending.len());
                    }
                });
            }
        });

        if let Some(err) = fatal.into_inner().expect("fatal lock") {
            return Err(err);
        }
        for (position, result) in results.into_inner().expect("results lock") {
            slots[position] = Some(result);
        }
        let mut predictions = Vec::with_capacity(total);
        let mut failures = Vec::new();
        for slot in slots {
            match slot.expect("every tweet resolved") {
                Ok(p) => predictions.push(p),
                Err(e) => failures.push(e),
            }
        }
        let after = self.cache.stats();
        Ok(BatchOutcome {
            predictions,
            failures,
            cache: CacheStats {
                hits: after.hits - before.hits,
                misses: after.misses - before.misses,
                writes: after.writes - before.writes,
            },
        })
    }
}
