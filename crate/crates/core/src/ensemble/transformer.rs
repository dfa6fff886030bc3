use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{parse_index, read_tsv, Category, DatasetError, LabelVector, TweetIndex};

pub const PROB_COLUMNS: [&str; 3] = ["prob_cat1", "prob_cat2", "prob_cat3"];
pub const LABEL_COLUMNS: [&str; 3] = ["label_cat1", "label_cat2", "label_cat3"];

/// Probability cut-off for turning sigmoid outputs into labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub value: f64,
    /// When true a probability equal to `value` counts as positive.
    pub inclusive: bool,
}

impl Default for Threshold {
    fn default() -> Self {
        Threshold {
            value: 0.5,
            inclusive: true,
        }
    }
}

impl Threshold {
    pub fn strict(value: f64) -> Self {
        Threshold { value, inclusive: false }
    }

    pub fn apply(&self, probability: f64) -> bool {
        if self.inclusive {
            probability >= self.value
        } else {
            probability > self.value
        }
    }

    pub fn labels(&self, probabilities: [f64; 3]) -> LabelVector {
        let [a, b, c] = probabilities.map(|p| self.apply(p));
        LabelVector::new(a, b, c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformerPrediction {
    pub tweet_index: TweetIndex,
    pub probabilities: Option<[f64; 3]>,
    pub labels: LabelVector,
}

/// Encoder predictions keyed by tweet index, remembering file order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TransformerTable {
    order: Vec<TweetIndex>,
    by_index: HashMap<TweetIndex, TransformerPrediction>,
}

impl TransformerTable {
    pub fn from_predictions(predictions: impl IntoIterator<Item = TransformerPrediction>) -> Self {
        let mut table = TransformerTable::default();
        for p in predictions {
            if table.by_index.insert(p.tweet_index, p.clone()).is_none() {
                table.order.push(p.tweet_index);
            }
        }
        table
    }

    pub fn get(&self, index: TweetIndex) -> Option<&TransformerPrediction> {
        self.by_index.get(&index)
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Predictions in file order.
    pub fn iter(&self) -> impl Iterator<Item = &TransformerPrediction> {
        self.order.iter().map(|i| &self.by_index[i])
    }

    pub fn labels(&self) -> Vec<(TweetIndex, LabelVector)> {
        self.iter().map(|p| (p.tweet_index, p.labels)).collect()
    }
}

#[derive(Debug, Error)]
pub enum TransformerLoadError {
    #[error(transparent)]
    Table(#[from] DatasetError),
    #[error("{path}: need index plus {} and/or {}", PROB_COLUMNS.join("/"), LABEL_COLUMNS.join("/"))]
    MissingColumns { path: PathBuf },
    #[error("{path}:{line}: column {column} value {value:?} is not a number")]
    NotANumber {
        path: PathBuf,
        line: usize,
        column: &'static str,
        value: String,
    },
    #[error("{path}:{line}: probability {value} in {column} is outside [0, 1]")]
    OutOfRange {
        path: PathBuf,
        line: usize,
        column: &'static str,
        value: f64,
    },
    #[error("{path}:{line}: label {value:?} in {column} is not 0 or 1")]
    NotBinary {
        path: PathBuf,
        line: usize,
        column: &'static str,
        value: String,
    },
    #[error("{path}:{line}: {category} label disagrees with probability {probability} at threshold {threshold}")]
    Inconsistent {
        path: PathBuf,
        line: usize,
        category: Category,
        probability: f64,
        threshold: f64,
    },
    #[error("{path}:{line}: duplicate index {index}")]
    DuplicateIndex {
        path: PathBuf,
        line: usize,
        index: TweetIndex,
    },
}

/// Load `index<TAB>prob_cat1..3[<TAB>label_cat1..3]` (either group may be
/// absent, not both). Labels are derived from probabilities when only the
/// latter are present and cross-checked when both are.
pub fn load_transformer_predictions(
    path: impl AsRef<Path>,
    threshold: Threshold,
) -> Result<TransformerTable, TransformerLoadError> {
    let path = path.as_ref();
    let table = read_tsv(path)?;
    let index_col = table.column("index").ok_or_else(|| DatasetError::MissingColumn {
        path: path.to_owned(),
        column: "index",
    })?;
    let group = |names: [&str; 3]| -> Option<[usize; 3]> {
        let cols = names.map(|n| table.column(n));
        cols.iter().all(Option::is_some).then(|| cols.map(Option::unwrap))
    };
    let probs = group(PROB_COLUMNS);
    let labels = group(LABEL_COLUMNS);
    if probs.is_none() && labels.is_none() {
        return Err(TransformerLoadError::MissingColumns { path: path.to_owned() });
    }

    let mut out = TransformerTable::default();
    for (line, fields) in &table.rows {
        let line = *line;
        let index = parse_index(path, line, &fields[index_col])?;
        let probabilities = probs
            .map(|cols| -> Result<[f64; 3], TransformerLoadError> {
                let mut values = [0.0; 3];
                for (slot, (col, name)) in values.iter_mut().zip(cols.iter().zip(PROB_COLUMNS)) {
                    let raw = fields[*col].trim();
                    let value: f64 = raw.parse().map_err(|_| TransformerLoadError::NotANumber {
                        path: path.to_owned(),
                        line,
                        column: name,
                        value: raw.to_owned(),
                    })?;
                    if !(0.0..=1.0).contains(&value) {
                        return Err(TransformerLoadError::OutOfRange {
                            path: path.to_owned(),
                            line,
                            column: name,
                            value,
                        });
                    }
                    *slot = value;
                }
                Ok(values)
            })
            .transpose()?;
        let given = labels
            .map(|cols| -> Result<LabelVector, TransformerLoadError> {
                let mut v = LabelVector::NONE;
                for ((col, name), category) in cols.iter().zip(LABEL_COLUMNS).zip(Category::ALL) {
                    let raw = fields[*col].trim();
                    let bit = match raw.parse::<f64>() {
                        Ok(0.0) => false,
                        Ok(1.0) => true,
                        _ => {
                            return Err(TransformerLoadError::NotBinary {
                                path: path.to_owned(),
                                line,
                                column: name,
                                value: raw.to_owned(),
                            })
                        }
                    };
                    v.set(category, bit);
                }
                Ok(v)
            })
            .transpose()?;
        let labels = match (probabilities, given) {
            (Some(p), Some(given)) => {
                let derived = threshold.labels(p);
                if let Some(category) = Category::ALL.into_iter().find(|c| derived.get(*c) != given.get(*c)) {
                    return Err(TransformerLoadError::Inconsistent {
                        path: path.to_owned(),
                        line,
                        category,
                        probability: p[category.position()],
                        threshold: threshold.value,
                    });
                }
                given
            }
            (Some(p), None) => threshold.labels(p),
            (None, Some(given)) => given,
            (None, None) => unreachable!("column groups checked above"),
        };
        if out.by_index.contains_key(&index) {
            return Err(TransformerLoadError::DuplicateIndex {
                path: path.to_owned(),
                line,
                index,
            });
        }
        out.order.push(index);
        out.by_index.insert(
            index,
            TransformerPrediction {
                tweet_index: index,
                probabilities,
                labels,
            },
        );
    }
    Ok(out)
}

/// Render predictions in the loader's format, with both column groups when
/// probabilities are available.
pub fn write_transformer_predictions(table: &TransformerTable) -> String {
    let with_probs = table.iter().all(|p| p.probabilities.is_some()) && !table.is_empty();
    let mut out = String::from("index");
    if with_probs {
        for c in PROB_COLUMNS {
            out.push('\t');
            out.push_str(c);
        }
    }
    for c in LABEL_COLUMNS {
        out.push('\t');
        out.push_str(c);
    }
    out.push('\n');
    for p in table.iter() {
        out.push_str(&p.tweet_index.to_string());
        if let (true, Some(probs)) = (with_probs, p.probabilities) {
            for v in probs {
                out.push_str(&format!("\t{v}"));
            }
        }
        for bit in p.labels.bits() {
            out.push_str(&format!("\t{bit}"));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn tsv(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn thresholds_probabilities() {
        let f = tsv("index\tprob_cat1\tprob_cat2\tprob_cat3\n1\t0.9\t0.2\t0.5\n2\t0.49999\t0\t1\n");
        let t = load_transformer_predictions(f.path(), Threshold::default()).unwrap();
        assert_eq!(t.get(TweetIndex(1)).unwrap().labels, LabelVector::new(true, false, true));
        assert_eq!(t.get(TweetIndex(2)).unwrap().labels, LabelVector::new(false, false, true));
        let strict = load_transformer_predictions(f.path(), Threshold::strict(0.5)).unwrap();
        assert_eq!(strict.get(TweetIndex(1)).unwrap().labels, LabelVector::new(true, false, false));
    }

    #[test]
    fn labels_only_and_both() {
        let f = tsv("index\tlabel_cat1\tlabel_cat2\tlabel_cat3\n4\t1\t0\t1.0\n");
        let t = load_transformer_predictions(f.path(), Threshold::default()).unwrap();
        let p = t.get(TweetIndex(4)).unwrap();
        assert_eq!(p.labels, LabelVector::new(true, false, true));
        assert!(p.probabilities.is_none());

        let f = tsv("index\tprob_cat1\tprob_cat2\tprob_cat3\tlabel_cat1\tlabel_cat2\tlabel_cat3\n4\t0.7\t0.1\t0.5\t1\t0\t1\n");
        assert!(load_transformer_predictions(f.path(), Threshold::default()).is_ok());
    }

    #[test]
    fn load_errors() {
        let f = tsv("index\tprob_cat1\tprob_cat2\tprob_cat3\n1\t1.3\t0\t0\n");
        let err = load_transformer_predictions(f.path(), Threshold::default()).unwrap_err();
        assert!(matches!(err, TransformerLoadError::OutOfRange { line: 2, column: "prob_cat1", .. }));
        assert!(err.to_string().contains(":2:"));

        let f = tsv("index\tprob_cat1\tprob_cat2\n1\t0.3\t0\n");
        assert!(matches!(
            load_transformer_predictions(f.path(), Threshold::default()),
            Err(TransformerLoadError::MissingColumns { .. })
        ));

        let f = tsv("index\tprob_cat1\tprob_cat2\tprob_cat3\tlabel_cat1\tlabel_cat2\tlabel_cat3\n4\t0.4\t0.1\t0.5\t1\t0\t1\n");
        assert!(matches!(
            load_transformer_predictions(f.path(), Threshold::default()),
            Err(TransformerLoadError::Inconsistent { category: Category::Claim, .. })
        ));

        let f = tsv("index\tlabel_cat1\tlabel_cat2\tlabel_cat3\n4\t2\t0\t1\n");
        assert!(matches!(
            load_transformer_predictions(f.path(), Threshold::default()),
            Err(TransformerLoadError::NotBinary { .. })
        ));

        let f = tsv("index\tprob_cat1\tprob_cat2\tprob_cat3\n1\tx\t0\t0\n");
        assert!(matches!(
            load_transformer_predictions(f.path(), Threshold::default()),
            Err(TransformerLoadError::NotANumber { .. })
        ));

        let f = tsv("index\tprob_cat1\tprob_cat2\tprob_cat3\n1\tNaN\t0\t0\n");
        assert!(load_transformer_predictions(f.path(), Threshold::default()).is_err());

        let f = tsv("index\tlabel_cat1\tlabel_cat2\tlabel_cat3\n1\t0\t0\t0\n1\t0\t0\t0\n");
        assert!(matches!(
            load_transformer_predictions(f.path(), Threshold::default()),
            Err(TransformerLoadError::DuplicateIndex { .. })
        ));
    }

    #[test]
    fn writer_round_trips() {
        let table = TransformerTable::from_predictions([
            TransformerPrediction {
                tweet_index: TweetIndex(2),
                probabilities: Some([0.8, 0.5, 0.1]),
                labels: LabelVector::new(true, true, false),
            },
            TransformerPrediction {
                tweet_index: TweetIndex(1),
                probabilities: Some([0.0, 0.25, 1.0]),
                labels: LabelVector::new(false, false, true),
            },
        ]);
        let f = tsv(&write_transformer_predictions(&table));
        assert_eq!(load_transformer_predictions(f.path(), Threshold::default()).unwrap(), table);
    }
}
