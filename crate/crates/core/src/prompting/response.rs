use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{parse_triple_body, LabelVector};

/// Longest bracket body considered as a candidate triple.
const MAX_TRIPLE_BODY: usize = 256;

/// No bracketed numeric triple was found in a model response.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("no bracketed label triple in response {raw:?}")]
pub struct ParseFailure {
    pub raw: String,
}

/// Extract the labels from a free-form model response.
///
/// Every `[...]` span without nested brackets is tried as a numeric triple;
/// the last one that parses wins. Elements are coerced with `>= 0.5`.
pub fn parse_label_response(raw: &str) -> Result<LabelVector, ParseFailure> {
    parse_label_response_bytes(raw.as_bytes())
}

/// Byte-level variant; invalid UTF-8 outside candidate spans is ignored.
pub fn parse_label_response_bytes(raw: &[u8]) -> Result<LabelVector, ParseFailure> {
    let mut open: Option<usize> = None;
    let mut last = None;
    for (pos, &byte) in raw.iter().enumerate() {
        match byte {
            b'[' => open = Some(pos),
            b']' => {
                if let Some(start) = open.take() {
                    let body = &raw[start + 1..pos];
                    if body.len() <= MAX_TRIPLE_BODY {
                        if let Some(values) = std::str::from_utf8(body).ok().and_then(|b| parse_triple_body(b).ok()) {
                            last = Some(LabelVector::from_scores(values));
                        }
                    }
                }
            }
            _ => {}
        }
    }
    last.ok_or_else(|| ParseFailure {
        raw: String::from_utf8_lossy(raw).into_owned(),
    })
}
