use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::labels::{parse_label_vector, LabelParseError, LabelVector};

/// Identifier from the `index` column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TweetIndex(pub u64);

impl fmt::Display for TweetIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tweet {
    pub index: TweetIndex,
    pub text: String,
}

impl Tweet {
    pub fn new(index: u64, text: impl Into<String>) -> Self {
        Tweet {
            index: TweetIndex(index),
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Dev,
    Eval,
}

impl Split {
    pub fn is_labeled(self) -> bool {
        !matches!(self, Split::Eval)
    }

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Eval => "eval",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "eval" | "test" => Ok(Split::Eval),
            other => Err(format!("unknown split {other:?} (expected train, dev or eval)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub tweet: Tweet,
    pub labels: Option<LabelVector>,
}

/// An ordered, index-unique collection of tweets from one split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    split: Split,
    records: Vec<Record>,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: file is empty, expected a header row")]
    MissingHeader { path: PathBuf },
    #[error("{path}: header lacks required column {column:?}")]
    MissingColumn { path: PathBuf, column: &'static str },
    #[error("{path}: split {split} must not have a labels column")]
    UnexpectedLabels { path: PathBuf, split: Split },
    #[error("{path}: split {split} requires a labels column")]
    MissingLabels { path: PathBuf, split: Split },
    #[error("{path}:{line}: expected {expected} tab-separated fields, found {found}")]
    FieldCount {
        path: PathBuf,
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("{path}:{line}: invalid index {value:?}")]
    BadIndex { path: PathBuf, line: usize, value: String },
    #[error("{path}:{line}: duplicate index {index}")]
    DuplicateIndex { path: PathBuf, line: usize, index: TweetIndex },
    #[error("{path}:{line}: tweet text is empty")]
    EmptyText { path: PathBuf, line: usize },
    #[error("{path}:{line}: {source}")]
    Labels {
        path: PathBuf,
        line: usize,
        #[source]
        source: LabelParseError,
    },
    #[error("record {index}: {reason}")]
    InvalidRecord { index: TweetIndex, reason: String },
}

impl Dataset {
    /// Build a dataset in memory, enforcing the same invariants as the loader.
    pub fn new(split: Split, records: Vec<Record>) -> Result<Self, DatasetError> {
        let mut seen = HashSet::with_capacity(records.len());
        for record in &records {
            let index = record.tweet.index;
            let reject = |reason: &str| DatasetError::InvalidRecord {
                index,
                reason: reason.to_owned(),
            };
            if !seen.insert(index) {
                return Err(reject("duplicate index"));
            }
            if record.tweet.text.trim().is_empty() {
                return Err(reject("empty text"));
            }
            if split.is_labeled() != record.labels.is_some() {
                return Err(reject(if split.is_labeled() {
                    "labeled split record without labels"
                } else {
                    "eval split record with labels"
                }));
            }
        }
        Ok(Dataset { split, records })
    }

    /// Convenience constructor for labeled in-memory data.
    pub fn labeled(
        split: Split,
        rows: impl IntoIterator<Item = (Tweet, LabelVector)>,
    ) -> Result<Self, DatasetError> {
        let records = rows
            .into_iter()
            .map(|(tweet, labels)| Record {
                tweet,
                labels: Some(labels),
            })
            .collect();
        Dataset::new(split, records)
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn tweets(&self) -> impl Iterator<Item = &Tweet> {
        self.records.iter().map(|r| &r.tweet)
    }

    /// `(index, labels)` pairs for labeled splits; empty for eval.
    pub fn gold(&self) -> impl Iterator<Item = (TweetIndex, LabelVector)> + '_ {
        self.records
            .iter()
            .filter_map(|r| r.labels.map(|l| (r.tweet.index, l)))
    }
}

/// A raw tab-separated table: header columns plus `(line number, fields)` rows.
pub(crate) struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<(usize, Vec<String>)>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

/// Read a strict one-record-per-line TSV whose first line is a header.
pub(crate) fn read_tsv(path: &Path) -> Result<Table, DatasetError> {
    let content = fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_owned(),
        source,
    })?;
    let mut lines = content
        .strip_prefix('\u{feff}')
        .unwrap_or(&content)
        .split('\n')
        .map(|l| l.strip_suffix('\r').unwrap_or(l))
        .enumerate()
        .map(|(i, l)| (i + 1, l));

    let header_line = match lines.next() {
        Some((_, l)) if !l.trim().is_empty() => l,
        _ => {
            return Err(DatasetError::MissingHeader {
                path: path.to_owned(),
            })
        }
    };
    let columns: Vec<String> = header_line.split('\t').map(|c| c.trim().to_owned()).collect();

    let mut rows = Vec::new();
    let mut pending_blank: Option<usize> = None;
    for (line_no, line) in lines {
        if line.is_empty() {
            pending_blank.get_or_insert(line_no);
            continue;
        }
        if let Some(blank) = pending_blank.take() {
            // Blank lines are only tolerated at the end of the file.
            return Err(DatasetError::FieldCount {
                path: path.to_owned(),
                line: blank,
                expected: columns.len(),
                found: 0,
            });
        }
        let fields: Vec<String> = line.split('\t').map(str::to_owned).collect();
        if fields.len() != columns.len() {
            return Err(DatasetError::FieldCount {
                path: path.to_owned(),
                line: line_no,
                expected: columns.len(),
                found: fields.len(),
            });
        }
        rows.push((line_no, fields));
    }
    Ok(Table { columns, rows })
}

struct Header {
    index: usize,
    text: Option<usize>,
    labels: Option<usize>,
}

type Rows = Vec<(usize, Vec<String>)>;

fn read_table(path: &Path) -> Result<(Header, Rows), DatasetError> {
    let table = read_tsv(path)?;
    let header = Header {
        index: table.column("index").ok_or_else(|| DatasetError::MissingColumn {
            path: path.to_owned(),
            column: "index",
        })?,
        text: table.column("text"),
        labels: table.column("labels"),
    };
    Ok((header, table.rows))
}

pub(crate) fn parse_index(path: &Path, line: usize, raw: &str) -> Result<TweetIndex, DatasetError> {
    raw.trim()
        .parse::<u64>()
        .map(TweetIndex)
        .map_err(|_| DatasetError::BadIndex {
            path: path.to_owned(),
            line,
            value: raw.to_owned(),
        })
}

fn parse_labels_field(path: &Path, line: usize, raw: &str) -> Result<LabelVector, DatasetError> {
    let trimmed = raw.trim();
    let unquoted = trimmed
        .strip_prefix('"')
        .and_then(|r| r.strip_suffix('"'))
        .unwrap_or(trimmed);
    parse_label_vector(unquoted).map_err(|source| DatasetError::Labels {
        path: path.to_owned(),
        line,
        source,
    })
}

/// Load a tab-separated split with header `index<TAB>text[<TAB>labels]`.
///
/// Each record occupies one physical line; a raw tab inside the text shows up
/// as an extra field and is rejected.
pub fn load_dataset(path: impl AsRef<Path>, split: Split) -> Result<Dataset, DatasetError> {
    let path = path.as_ref();
    let (header, rows) = read_table(path)?;
    let text_col = header.text.ok_or_else(|| DatasetError::MissingColumn {
        path: path.to_owned(),
        column: "text",
    })?;
    let labels_col = match (split.is_labeled(), header.labels) {
        (true, None) => {
            return Err(DatasetError::MissingLabels {
                path: path.to_owned(),
                split,
            })
        }
        (false, Some(_)) => {
            return Err(DatasetError::UnexpectedLabels {
                path: path.to_owned(),
                split,
            })
        }
        (_, col) => col,
    };

    let mut seen = HashSet::with_capacity(rows.len());
    let mut records = Vec::with_capacity(rows.len());
    for (line, fields) in rows {
        let index = parse_index(path, line, &fields[header.index])?;
        if !seen.insert(index) {
            return Err(DatasetError::DuplicateIndex {
                path: path.to_owned(),
                line,
                index,
            });
        }
        let text = fields[text_col].clone();
        if text.trim().is_empty() {
            return Err(DatasetError::EmptyText {
                path: path.to_owned(),
                line,
            });
        }
        let labels = labels_col
            .map(|col| parse_labels_field(path, line, &fields[col]))
            .transpose()?;
        records.push(Record {
            tweet: Tweet { index, text },
            labels,
        });
    }
    Ok(Dataset { split, records })
}

/// Whether the file's header carries a `labels` column.
pub fn has_labels_column(path: impl AsRef<Path>) -> Result<bool, DatasetError> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_owned(),
        source,
    })?;
    let header = content.lines().next().unwrap_or_default();
    Ok(header.split('\t').any(|c| c.trim() == "labels"))
}

/// Load only `index` and `labels` from any TSV carrying those columns.
///
/// Used for prediction files (`index<TAB>labels`) as well as gold splits,
/// whose `text` column is ignored here.
pub fn load_label_table(path: impl AsRef<Path>) -> Result<Vec<(TweetIndex, LabelVector)>, DatasetError> {
    let path = path.as_ref();
    let (header, rows) = read_table(path)?;
    let labels_col = header.labels.ok_or_else(|| DatasetError::MissingColumn {
        path: path.to_owned(),
        column: "labels",
    })?;
    let mut seen = HashSet::with_capacity(rows.len());
    let mut out = Vec::with_capacity(rows.len());
    for (line, fields) in rows {
        let index = parse_index(path, line, &fields[header.index])?;
        if !seen.insert(index) {
            return Err(DatasetError::DuplicateIndex {
                path: path.to_owned(),
                line,
                index,
            });
        }
        out.push((index, parse_labels_field(path, line, &fields[labels_col])?));
    }
    Ok(out)
}

/// Render `index<TAB>labels` rows with a header, in the given order.
pub fn write_label_table<'a>(rows: impl IntoIterator<Item = (TweetIndex, &'a LabelVector)>) -> String {
    let mut out = String::from("index\tlabels\n");
    for (index, labels) in rows {
        out.push_str(&format!("{index}\t{labels}\n"));
    }
    out
}

/// Render a dataset back to its TSV form.
pub fn write_dataset(ds: &Dataset) -> String {
    let mut out = String::from(if ds.split.is_labeled() {
        "index\ttext\tlabels\n"
    } else {
        "index\ttext\n"
    });
    for r in &ds.records {
        out.push_str(&format!("{}\t{}", r.tweet.index, r.tweet.text));
        if let Some(l) = r.labels {
            out.push_str(&format!("\t{l}"));
        }
        out.push('\n');
    }
    out
}
