//! Tweet datasets: TSV ingestion, label vectors and label statistics.

mod dataset;
mod labels;
mod stats;

pub use dataset::{
    has_labels_column, load_dataset, load_label_table, write_dataset, write_label_table, Dataset,
    DatasetError, Record, Split, Tweet, TweetIndex,
};
pub(crate) use dataset::{parse_index, read_tsv};
pub(crate) use labels::parse_triple_body;
pub use labels::{parse_label_vector, Category, LabelParseError, LabelVector};
pub use stats::{audit_dependency, compute_stats, StatsReport, UnlabeledSplit, VENN_REGIONS};
