use std::cmp::Ordering;

use num_traits::Float;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{Tweet, TweetIndex};
use crate::retrieval::ScoredExample;

const ZERO_SHOT_SYSTEM: &str = include_str!("../../templates/zero_shot_system.txt");
const ZERO_SHOT_USER: &str = include_str!("../../templates/zero_shot_user.txt");
const FEW_SHOT_HEADER: &str = include_str!("../../templates/few_shot_header.txt");
const SHOT: &str = include_str!("../../templates/shot.txt");

/// Joins the system block to the user block in the flattened prompt.
const SYSTEM_SEPARATOR: &str = "\n";
/// Joins the examples header and each rendered shot.
const SECTION_SEPARATOR: &str = "\n\n";

pub const TWEET_SLOT: &str = "{tweet}";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptMode {
    ZeroShot,
    FewShot,
}

/// The prompt resource files, as shipped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub system_text: &'static str,
    pub user_text_template: &'static str,
    pub examples_header: &'static str,
    pub shot_template: &'static str,
}

pub static TEMPLATE: PromptTemplate = PromptTemplate {
    system_text: ZERO_SHOT_SYSTEM,
    user_text_template: ZERO_SHOT_USER,
    examples_header: FEW_SHOT_HEADER,
    shot_template: SHOT,
};

/// SHA-256 of each template resource, for `--version` output.
pub fn template_checksums() -> Vec<(&'static str, String)> {
    [
        ("zero_shot_system.txt", ZERO_SHOT_SYSTEM),
        ("zero_shot_user.txt", ZERO_SHOT_USER),
        ("few_shot_header.txt", FEW_SHOT_HEADER),
        ("shot.txt", SHOT),
    ]
    .into_iter()
    .map(|(name, body)| (name, sha256_hex(body)))
    .collect()
}

pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// A fully rendered classification prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub mode: PromptMode,
    /// Instruction block sent as the system message.
    pub system: String,
    /// Remainder sent as the user message.
    pub user: String,
    /// `system`, a newline, then `user`.
    pub full_text: String,
    pub shot_indices: Vec<TweetIndex>,
    /// Hex SHA-256 of `full_text`.
    pub content_hash: String,
}

impl RenderedPrompt {
    fn new(mode: PromptMode, user: String, shot_indices: Vec<TweetIndex>) -> Self {
        let system = TEMPLATE.system_text.to_owned();
        let full_text = format!("{system}{SYSTEM_SEPARATOR}{user}");
        let content_hash = sha256_hex(&full_text);
        RenderedPrompt {
            mode,
            system,
            user,
            full_text,
            shot_indices,
            content_hash,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("few-shot prompt needs at least one shot")]
    NoShots,
}

fn user_text(tweet: &Tweet) -> String {
    // Only the template's slot is replaced; the tweet itself is never rescanned.
    TEMPLATE.user_text_template.replacen(TWEET_SLOT, &tweet.text, 1)
}

pub fn render_zero_shot(tweet: &Tweet) -> RenderedPrompt {
    RenderedPrompt::new(PromptMode::ZeroShot, user_text(tweet), Vec::new())
}

fn render_shot<F>(shot: &ScoredExample<F>) -> String {
    let example = &shot.example;
    let labels = example.labels.canonical();
    let mut out = String::with_capacity(TEMPLATE.shot_template.len() + example.tweet.text.len() + labels.len());
    // Split on the slots rather than chained replace so shot text containing
    // "{labels}" is left alone.
    let (before_text, rest) = TEMPLATE.shot_template.split_once("{text}").expect("shot template has {text}");
    let (between, after_labels) = rest.split_once("{labels}").expect("shot template has {labels}");
    out.push_str(before_text);
    out.push_str(&example.tweet.text);
    out.push_str(between);
    out.push_str(&labels);
    out.push_str(after_labels);
    out
}

/// Zero-shot body, the examples header, then one block per shot in
/// descending similarity (ties by ascending tweet index).
pub fn render_few_shot<F: Float>(tweet: &Tweet, shots: &[ScoredExample<F>]) -> Result<RenderedPrompt, PromptError> {
    if shots.is_empty() {
        return Err(PromptError::NoShots);
    }
    let mut ordered: Vec<&ScoredExample<F>> = shots.iter().collect();
    ordered.sort_by(|a, b| {
        b.similarity
            .partial_cmp(&a.similarity)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.index().cmp(&b.index()))
    });
    let mut user = user_text(tweet);
    user.push_str(SECTION_SEPARATOR);
    user.push_str(TEMPLATE.examples_header);
    for shot in &ordered {
        user.push_str(SECTION_SEPARATOR);
        user.push_str(&render_shot(shot));
    }
    let shot_indices = ordered.iter().map(|s| s.index()).collect();
    Ok(RenderedPrompt::new(PromptMode::FewShot, user, shot_indices))
}
