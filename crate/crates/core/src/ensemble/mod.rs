//! Routed fusion of transformer and LLM predictions, and the end-to-end run.

mod fuse;
mod pipeline;
mod transformer;

pub use fuse::{enforce_dependency, fuse, fuse_tables, FuseError, RoutingConfig, RoutingParseError, Source};
pub use pipeline::{
    run_pipeline, Gap, LlmStage, PipelineError, PipelineMetadata, PipelineOptions, PipelineRecord, PipelineResult,
    RecordFlags,
};
pub use transformer::{
    load_transformer_predictions, write_transformer_predictions, Threshold, TransformerLoadError,
    TransformerPrediction, TransformerTable, LABEL_COLUMNS, PROB_COLUMNS,
};
