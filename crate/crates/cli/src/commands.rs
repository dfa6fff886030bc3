use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Duration;

use serde_json::json;
use swd_core::corpus::{
    audit_dependency, compute_stats, has_labels_column, load_dataset, load_label_table, parse_label_vector,
    write_label_table, LabelVector, Split, TweetIndex,
};
use swd_core::ensemble::{
    fuse_tables, load_transformer_predictions, run_pipeline, LlmStage, PipelineOptions, RoutingConfig, Source,
    Threshold, TransformerTable,
};
use swd_core::http::API_KEY_ENV;
use swd_core::llm::{ChatBackend, Gateway, LlmConfig, MockBehavior, MockLlm, OpenAiChatClient, ResponseCache, ShotSource};
use swd_core::metrics::{format_table, Scorer};
use swd_core::prompting::PromptMode;
use swd_core::retrieval::build_index;
use swd_core::{Embedding, ExampleIndex};
use tracing::{info, warn};

use crate::manifest::{sidecar, RunManifest};
use crate::providers::{resolve_base_url, ProviderChoice};
use crate::{CliError, EvaluateArgs, FuseArgs, IndexArgs, PredictArgs, RetrieveArgs, StatsArgs};

fn write(path: &Path, body: &str) -> Result<(), CliError> {
    fs::write(path, body).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn split_for(path: &Path, explicit: Option<Split>, labeled: Split) -> Result<Split, CliError> {
    match explicit {
        Some(s) => Ok(s),
        None => Ok(if has_labels_column(path).map_err(CliError::input)? {
            labeled
        } else {
            Split::Eval
        }),
    }
}

fn threshold(value: f64, strict: bool) -> Result<Threshold, CliError> {
    if !(0.0..=1.0).contains(&value) {
        return Err(CliError::Input(format!("threshold {value} is outside [0, 1]")));
    }
    Ok(Threshold {
        value,
        inclusive: !strict,
    })
}

pub fn stats(args: StatsArgs) -> Result<(), CliError> {
    let split = split_for(&args.path, args.split, Split::Train)?;
    let ds = load_dataset(&args.path, split).map_err(CliError::input)?;
    let report = compute_stats(&ds).map_err(CliError::input)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report).map_err(CliError::input)?);
    } else {
        println!("{report}");
        let violations = audit_dependency(&ds);
        if !violations.is_empty() {
            let shown: Vec<String> = violations.iter().take(20).map(ToString::to_string).collect();
            println!("violating indices: {}", shown.join(", "));
        }
    }
    RunManifest::new("stats", json!({ "path": args.path, "split": split.name() })).emit(args.manifest.as_deref())
}

pub fn index(args: IndexArgs) -> Result<(), CliError> {
    let ds = load_dataset(&args.train, split_for(&args.train, None, Split::Train)?).map_err(CliError::input)?;
    let provider = args.provider.build(args.base_url.as_deref())?;
    let build = build_index::<Embedding, _>(&ds, provider.as_ref()).map_err(CliError::input)?;
    for rejected in &build.rejected {
        warn!("skipped: {rejected}");
    }
    build.index.save(&args.out).map_err(CliError::input)?;
    info!(
        entries = build.index.len(),
        rejected = build.rejected.len(),
        "wrote {}",
        args.out.display()
    );
    RunManifest::new(
        "index",
        json!({
            "train": args.train,
            "out": args.out,
            "provider": args.provider.to_string(),
            "entries": build.index.len(),
            "rejected": build.rejected.len(),
        }),
    )
    .emit(Some(&sidecar(&args.out, "manifest.json")))
}

fn load_index(path: &Path) -> Result<ExampleIndex, CliError> {
    ExampleIndex::load(path).map_err(CliError::input)
}

pub fn retrieve(args: RetrieveArgs) -> Result<(), CliError> {
    let index = load_index(&args.index)?;
    let choice = match args.provider {
        Some(p) => p,
        None => ProviderChoice::for_index(&index)?,
    };
    let provider = choice.build(args.base_url.as_deref())?;
    let shots = index.top_k(&args.query, args.k, provider.as_ref()).map_err(CliError::input)?;
    if args.k > index.len() {
        println!("note: k={} exceeds the index size; listing all {} entries", args.k, index.len());
    }
    println!("rank\tindex\tsimilarity\tlabels\ttext");
    for (rank, shot) in shots.iter().enumerate() {
        println!(
            "{}\t{}\t{:.4}\t{}\t{}",
            rank + 1,
            shot.index(),
            shot.similarity,
            shot.example.labels,
            shot.example.tweet.text
        );
    }
    RunManifest::new(
        "retrieve",
        json!({ "index": args.index, "query": args.query, "k": args.k, "provider": choice.to_string() }),
    )
    .emit(args.manifest.as_deref())
}

/// Offline chat backends selectable from the command line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MockChoice {
    Constant(LabelVector),
    Echo(String),
    Nearest,
    Fixed(String),
}

impl FromStr for MockChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("invalid mock {s:?}: expected constant:a,b,c | echo:<tsv> | nearest | fixed:<text>");
        match s.split_once(':') {
            Some(("constant", bits)) => parse_label_vector(&format!("[{bits}]"))
                .map(MockChoice::Constant)
                .map_err(|_| bad()),
            Some(("echo", path)) if !path.is_empty() => Ok(MockChoice::Echo(path.to_owned())),
            Some(("fixed", text)) => Ok(MockChoice::Fixed(text.to_owned())),
            None if s == "nearest" => Ok(MockChoice::Nearest),
            _ => Err(bad()),
        }
    }
}

impl std::fmt::Display for MockChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MockChoice::Constant(v) => {
                let [a, b, c] = v.bits();
                write!(f, "constant:{a},{b},{c}")
            }
            MockChoice::Echo(p) => write!(f, "echo:{p}"),
            MockChoice::Nearest => f.write_str("nearest"),
            MockChoice::Fixed(t) => write!(f, "fixed:{t}"),
        }
    }
}

fn backend(args: &PredictArgs, cfg: &LlmConfig) -> Result<Arc<dyn ChatBackend>, CliError> {
    Ok(match &args.mock {
        Some(MockChoice::Constant(v)) => Arc::new(MockLlm::new(MockBehavior::Constant(*v))),
        Some(MockChoice::Echo(path)) => {
            Arc::new(MockLlm::new(MockBehavior::echo_from_file(path).map_err(CliError::input)?))
        }
        Some(MockChoice::Nearest) => Arc::new(MockLlm::new(MockBehavior::NearestShotLabels)),
        Some(MockChoice::Fixed(t)) => Arc::new(MockLlm::new(MockBehavior::Fixed(t.clone()))),
        None => {
            let key = std::env::var(API_KEY_ENV).ok();
            if key.is_none() {
                warn!("{API_KEY_ENV} is not set; requests are sent without credentials");
            }
            Arc::new(OpenAiChatClient::new(cfg, key).map_err(CliError::input)?)
        }
    })
}

pub fn predict(args: PredictArgs) -> Result<(), CliError> {
    let split = split_for(&args.data, args.split, Split::Dev)?;
    let ds = load_dataset(&args.data, split).map_err(CliError::input)?;
    let rule = threshold(args.threshold, args.strict_threshold)?;
    let transformer: Option<TransformerTable> = args
        .transformer
        .as_ref()
        .map(|p| load_transformer_predictions(p, rule))
        .transpose()
        .map_err(CliError::input)?;
    let routing = args.routing.unwrap_or(if transformer.is_some() {
        RoutingConfig::default()
    } else {
        RoutingConfig::ALL_LLM
    });
    let mode = PromptMode::from(args.mode);
    let leave_one_out = args.leave_one_out.unwrap_or(split == Split::Train);

    let cfg = LlmConfig {
        model_name: args.model.clone(),
        temperature: args.temperature,
        max_output_tokens: args.max_tokens,
        base_url: resolve_base_url(args.base_url.as_deref()),
        timeout: Duration::from_secs(args.timeout_secs),
        max_retries: args.max_retries,
        parallelism: args.parallelism,
        message_layout: args.message_layout.into(),
        ..LlmConfig::default()
    };

    let uses_llm = routing.uses(Source::Llm);
    let index = match (&args.index, mode, uses_llm) {
        (Some(path), PromptMode::FewShot, true) => Some(load_index(path)?),
        (None, PromptMode::FewShot, true) => {
            return Err(CliError::Input("few-shot mode needs --index (or use --mode zero)".into()))
        }
        _ => None,
    };
    let provider_choice = match (&index, &args.provider) {
        (Some(_), Some(p)) => Some(p.clone()),
        (Some(ix), None) => Some(ProviderChoice::for_index(ix)?),
        _ => None,
    };
    let provider = provider_choice.as_ref().map(|p| p.build(args.base_url.as_deref())).transpose()?;

    let gateway = if uses_llm {
        let cache = match &args.cache {
            Some(path) => ResponseCache::open(path).map_err(CliError::input)?,
            None => ResponseCache::in_memory(),
        };
        Some(Gateway::new(backend(&args, &cfg)?, cache, cfg.clone()).map_err(CliError::input)?)
    } else {
        None
    };
    let stage = gateway.as_ref().map(|g| LlmStage {
        gateway: g,
        mode,
        shots: index.as_ref().zip(provider.as_deref()).map(|(index, provider)| ShotSource {
            index,
            provider,
            k: args.k,
            leave_one_out,
        }),
    });

    let options = PipelineOptions {
        routing,
        enforce_dependency: args.enforce_dependency,
    };
    let result = run_pipeline::<Embedding>(&ds, transformer.as_ref(), stage, options).map_err(CliError::input)?;

    write(&args.out, &write_label_table(result.records.iter().map(|r| (r.index, &r.fused))))?;
    let meta = serde_json::to_string_pretty(&result).map_err(CliError::input)? + "\n";
    write(&sidecar(&args.out, "meta.json"), &meta)?;
    RunManifest::new(
        "predict",
        json!({
            "data": args.data,
            "split": split.name(),
            "out": args.out,
            "mode": mode,
            "index": args.index,
            "provider": provider_choice.map(|p| p.to_string()),
            "k": args.k,
            "leave_one_out": leave_one_out,
            "llm": uses_llm.then_some(&cfg),
            "cache": args.cache,
            "mock": args.mock.as_ref().map(ToString::to_string),
            "transformer": args.transformer,
            "threshold": rule,
            "routing": routing,
            "enforce_dependency": args.enforce_dependency,
        }),
    )
    .emit(Some(&sidecar(&args.out, "manifest.json")))?;
    info!(predictions = result.records.len(), "wrote {}", args.out.display());

    if result.gaps.is_empty() {
        Ok(())
    } else {
        Err(CliError::Partial { gaps: result.gaps })
    }
}

pub fn fuse(args: FuseArgs) -> Result<(), CliError> {
    let rule = threshold(args.threshold, args.strict_threshold)?;
    let transformer = load_transformer_predictions(&args.transformer, rule).map_err(CliError::input)?;
    let llm = load_label_table(&args.llm).map_err(CliError::input)?;
    let fused = fuse_tables(&transformer.labels(), &llm, &args.routing).map_err(CliError::input)?;
    write(&args.out, &write_label_table(fused.iter().map(|(i, l)| (*i, l))))?;
    RunManifest::new(
        "fuse",
        json!({
            "transformer": args.transformer,
            "llm": args.llm,
            "routing": args.routing,
            "threshold": rule,
            "out": args.out,
        }),
    )
    .emit(Some(&sidecar(&args.out, "manifest.json")))
}

/// A label table, or transformer predictions when there is no labels column.
fn load_predictions(path: &Path) -> Result<Vec<(TweetIndex, LabelVector)>, CliError> {
    if has_labels_column(path).map_err(CliError::input)? {
        load_label_table(path).map_err(CliError::input)
    } else {
        Ok(load_transformer_predictions(path, Threshold::default())
            .map_err(CliError::input)?
            .labels())
    }
}

pub fn evaluate(args: EvaluateArgs) -> Result<(), CliError> {
    let preds = load_predictions(&args.pred)?;
    let gold = load_label_table(&args.gold).map_err(CliError::input)?;
    let report = Scorer::with_zero_division(args.zero_division)
        .evaluate(&preds, &gold)
        .map_err(CliError::input)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report.summary()).map_err(CliError::input)?);
    } else {
        let name = args.name.clone().unwrap_or_else(|| {
            args.pred
                .file_stem()
                .map_or_else(|| "predictions".to_owned(), |s| s.to_string_lossy().into_owned())
        });
        print!("{}", format_table([(name.as_str(), &report)]));
    }
    RunManifest::new(
        "evaluate",
        json!({ "pred": args.pred, "gold": args.gold, "zero_division": args.zero_division }),
    )
    .emit(args.manifest.as_deref())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mock_choices() {
        assert_eq!("constant:0,1,0".parse(), Ok(MockChoice::Constant(LabelVector::from_bits([0, 1, 0]))));
        assert_eq!("nearest".parse(), Ok(MockChoice::Nearest));
        assert_eq!("echo:dev.tsv".parse(), Ok(MockChoice::Echo("dev.tsv".into())));
        assert!("constant:0,1".parse::<MockChoice>().is_err());
        assert!("echo:".parse::<MockChoice>().is_err());
        assert!("random".parse::<MockChoice>().is_err());
        assert_eq!("constant:1,0,1".parse::<MockChoice>().unwrap().to_string(), "constant:1,0,1");
    }
}
