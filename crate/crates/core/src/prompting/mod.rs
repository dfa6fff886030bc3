//! Classification prompts and recovery of label vectors from model output.

mod response;
mod template;

pub use response::{parse_label_response, parse_label_response_bytes, ParseFailure};
pub use template::{
    render_few_shot, render_zero_shot, sha256_hex, template_checksums, PromptError, PromptMode, PromptTemplate,
    RenderedPrompt, TEMPLATE, TWEET_SLOT,
};
