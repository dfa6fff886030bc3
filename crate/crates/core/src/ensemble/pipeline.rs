use std::collections::HashMap;

use num_traits::Float;
use serde::Serialize;
use thiserror::Error;
use tracing::info;

use super::fuse::{enforce_dependency, fuse, RoutingConfig, Source};
use super::transformer::TransformerTable;
use crate::corpus::{Dataset, LabelVector, TweetIndex};
use crate::llm::{BatchError, CacheStats, Gateway, LlmPrediction, ShotSource};
use crate::prompting::PromptMode;

/// The LLM half of a run.
pub struct LlmStage<'a, F> {
    pub gateway: &'a Gateway,
    pub mode: PromptMode,
    /// Required in few-shot mode.
    pub shots: Option<ShotSource<'a, F>>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PipelineOptions {
    pub routing: RoutingConfig,
    /// Force entity=1 wherever the fused reference label is 1.
    pub enforce_dependency: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct RecordFlags {
    /// The LLM answer had no label triple; its labels fell back to all zeros.
    pub parse_failure: bool,
    pub from_cache: bool,
    pub dependency_adjusted: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PipelineRecord {
    pub index: TweetIndex,
    pub transformer: Option<LabelVector>,
    pub llm: Option<LabelVector>,
    pub fused: LabelVector,
    pub flags: RecordFlags,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineMetadata {
    pub routing: RoutingConfig,
    pub enforce_dependency: bool,
    pub model: Option<String>,
    pub temperature: Option<f64>,
    pub mode: Option<PromptMode>,
    pub k: Option<usize>,
    pub cache: Option<CacheStats>,
}

/// A tweet the LLM could not classify.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Gap {
    pub index: TweetIndex,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineResult {
    /// Fused records in dataset order. Gaps are absent.
    pub records: Vec<PipelineRecord>,
    pub metadata: PipelineMetadata,
    pub gaps: Vec<Gap>,
}

impl PipelineResult {
    pub fn predictions(&self) -> Vec<(TweetIndex, LabelVector)> {
        self.records.iter().map(|r| (r.index, r.fused)).collect()
    }

    pub fn is_complete(&self) -> bool {
        self.gaps.is_empty()
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("no transformer prediction for {} tweet(s): {}", missing.len(), list(missing))]
    MissingTransformer { missing: Vec<TweetIndex> },
    #[error("routing {routing} needs {needed:?} predictions but none were configured")]
    SourceNotConfigured { routing: RoutingConfig, needed: Source },
    #[error(transparent)]
    Batch(#[from] BatchError),
}

fn list(indices: &[TweetIndex]) -> String {
    const SHOWN: usize = 20;
    let mut s: Vec<String> = indices.iter().take(SHOWN).map(ToString::to_string).collect();
    if indices.len() > SHOWN {
        s.push("...".into());
    }
    s.join(", ")
}

/// Run the routed ensemble over a dataset. The LLM is called only when the
/// routing takes at least one category from it.
pub fn run_pipeline<F: Float>(
    ds: &Dataset,
    transformer: Option<&TransformerTable>,
    llm: Option<LlmStage<'_, F>>,
    options: PipelineOptions,
) -> Result<PipelineResult, PipelineError> {
    let routing = options.routing;
    let not_configured = |needed| PipelineError::SourceNotConfigured { routing, needed };

    if routing.uses(Source::Transformer) {
        let table = transformer.ok_or_else(|| not_configured(Source::Transformer))?;
        let missing: Vec<TweetIndex> = ds.tweets().map(|t| t.index).filter(|i| table.get(*i).is_none()).collect();
        if !missing.is_empty() {
            return Err(PipelineError::MissingTransformer { missing });
        }
    }

    let mut metadata = PipelineMetadata {
        routing,
        enforce_dependency: options.enforce_dependency,
        model: None,
        temperature: None,
        mode: None,
        k: None,
        cache: None,
    };
    let mut llm_by_index: HashMap<TweetIndex, LlmPrediction> = HashMap::new();
    let mut gaps = Vec::new();
    if routing.uses(Source::Llm) {
        let stage = llm.ok_or_else(|| not_configured(Source::Llm))?;
        let cfg = stage.gateway.config();
        metadata.model = Some(cfg.model_name.clone());
        metadata.temperature = Some(cfg.temperature);
        metadata.mode = Some(stage.mode);
        metadata.k = match stage.mode {
            PromptMode::FewShot => stage.shots.as_ref().map(|s| s.k),
            PromptMode::ZeroShot => None,
        };
        let outcome = stage.gateway.classify_batch(ds, stage.mode, stage.shots.as_ref())?;
        metadata.cache = Some(outcome.cache);
        gaps = outcome
            .failures
            .iter()
            .map(|f| Gap {
                index: f.tweet_index,
                error: f.kind.to_string(),
            })
            .collect();
        llm_by_index = outcome.predictions.into_iter().map(|p| (p.tweet_index, p)).collect();
    }

    let mut records = Vec::with_capacity(ds.len());
    for tweet in ds.tweets() {
        let t = transformer.and_then(|table| table.get(tweet.index)).map(|p| p.labels);
        let l = llm_by_index.get(&tweet.index);
        if routing.uses(Source::Llm) && l.is_none() {
            continue;
        }
        let mut fused = fuse(t.unwrap_or(LabelVector::NONE), l.map_or(LabelVector::NONE, |p| p.labels), &routing);
        let mut flags = RecordFlags {
            parse_failure: l.is_some_and(|p| !p.parse_ok),
            from_cache: l.is_some_and(|p| p.from_cache),
            dependency_adjusted: false,
        };
        if options.enforce_dependency {
            (fused, flags.dependency_adjusted) = enforce_dependency(fused);
        }
        records.push(PipelineRecord {
            index: tweet.index,
            transformer: t,
            llm: l.map(|p| p.labels),
            fused,
            flags,
        });
    }
    info!(
        records = records.len(),
        gaps = gaps.len(),
        parse_failures = records.iter().filter(|r| r.flags.parse_failure).count(),
        "pipeline finished"
    );
    Ok(PipelineResult {
        records,
        metadata,
        gaps,
    })
}
