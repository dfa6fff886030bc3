//! Per-category precision/recall/F1 and the macro-averaged F1 used as the
//! official task metric.
//!
//! Everything is generic over [`Scalar`], so the same code scores in `f64`
//! for reporting and in exact rationals for verification. A quotient whose
//! numerator and denominator are both zero takes the configured
//! `zero_division` value (0 by default).

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Category, LabelVector, TweetIndex};
use crate::scalar::Scalar;

/// Number of categories averaged over.
pub const NUM_CATEGORIES: usize = 3;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    fn record(&mut self, predicted: bool, gold: bool) {
        match (predicted, gold) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategoryScore<T> {
    pub precision: T,
    pub recall: T,
    pub f1: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReportOf<T> {
    pub per_category: [CategoryScore<T>; NUM_CATEGORIES],
    pub macro_f1: T,
    pub counts: [ConfusionCounts; NUM_CATEGORIES],
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("prediction and gold lists differ in length ({preds} vs {golds})")]
    LengthMismatch { preds: usize, golds: usize },
    #[error("no prediction for {} gold tweet(s): {}", .missing.len(), format_indices(.missing))]
    MissingPredictions { missing: Vec<TweetIndex> },
    #[error("duplicate {side} entry for tweet {index}")]
    DuplicateIndex { side: &'static str, index: TweetIndex },
}

fn format_indices(indices: &[TweetIndex]) -> String {
    const SHOWN: usize = 20;
    let mut s = indices
        .iter()
        .take(SHOWN)
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(", ");
    if indices.len() > SHOWN {
        s.push_str(&format!(", ... ({} more)", indices.len() - SHOWN));
    }
    s
}

/// Position-aligned contingency counts for one category.
pub fn confusion(
    preds: &[LabelVector],
    golds: &[LabelVector],
    category: Category,
) -> Result<ConfusionCounts, MetricsError> {
    if preds.len() != golds.len() {
        return Err(MetricsError::LengthMismatch {
            preds: preds.len(),
            golds: golds.len(),
        });
    }
    let mut counts = ConfusionCounts::default();
    for (p, g) in preds.iter().zip(golds) {
        counts.record(p.get(category), g.get(category));
    }
    Ok(counts)
}

/// Scoring parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scorer<T> {
    pub zero_division: T,
}

impl<T: Scalar> Default for Scorer<T> {
    fn default() -> Self {
        Scorer {
            zero_division: T::zero(),
        }
    }
}

impl<T: Scalar> Scorer<T> {
    pub fn with_zero_division(zero_division: T) -> Self {
        Scorer { zero_division }
    }

    fn ratio(&self, num: T, den: T) -> T {
        if den == T::zero() {
            self.zero_division
        } else {
            num / den
        }
    }

    pub fn precision_recall_f1(&self, c: &ConfusionCounts) -> CategoryScore<T> {
        let tp = T::from_count(c.tp);
        let precision = self.ratio(tp, T::from_count(c.tp + c.fp));
        let recall = self.ratio(tp, T::from_count(c.tp + c.fn_));
        let two = T::one() + T::one();
        let f1 = self.ratio(two * precision * recall, precision + recall);
        CategoryScore {
            precision,
            recall,
            f1,
        }
    }

    /// Score index-keyed predictions against index-keyed gold labels.
    ///
    /// Every gold index needs a prediction; predictions for tweets absent
    /// from the gold set are ignored.
    pub fn evaluate(
        &self,
        preds: &[(TweetIndex, LabelVector)],
        golds: &[(TweetIndex, LabelVector)],
    ) -> Result<MetricsReportOf<T>, MetricsError> {
        let mut by_index = HashMap::with_capacity(preds.len());
        for (index, labels) in preds {
            if by_index.insert(*index, *labels).is_some() {
                return Err(MetricsError::DuplicateIndex {
                    side: "prediction",
                    index: *index,
                });
            }
        }
        let mut aligned_preds = Vec::with_capacity(golds.len());
        let mut aligned_golds = Vec::with_capacity(golds.len());
        let mut missing = Vec::new();
        let mut seen_gold = HashMap::with_capacity(golds.len());
        for (index, gold) in golds {
            if seen_gold.insert(*index, ()).is_some() {
                return Err(MetricsError::DuplicateIndex {
                    side: "gold",
                    index: *index,
                });
            }
            match by_index.get(index) {
                Some(p) => {
                    aligned_preds.push(*p);
                    aligned_golds.push(*gold);
                }
                None => missing.push(*index),
            }
        }
        if !missing.is_empty() {
            return Err(MetricsError::MissingPredictions { missing });
        }
        self.evaluate_aligned(&aligned_preds, &aligned_golds)
    }

    /// Score position-aligned lists.
    pub fn evaluate_aligned(
        &self,
        preds: &[LabelVector],
        golds: &[LabelVector],
    ) -> Result<MetricsReportOf<T>, MetricsError> {
        let mut counts = [ConfusionCounts::default(); NUM_CATEGORIES];
        for (slot, category) in counts.iter_mut().zip(Category::ALL) {
            *slot = confusion(preds, golds, category)?;
        }
        let per_category = counts.map(|c| self.precision_recall_f1(&c));
        let macro_f1 = macro_f1(per_category.map(|s| s.f1));
        Ok(MetricsReportOf {
            per_category,
            macro_f1,
            counts,
        })
    }
}

/// Precision, recall and F1 with the 0/0 → 0 convention.
pub fn precision_recall_f1<T: Scalar>(c: &ConfusionCounts) -> CategoryScore<T> {
    Scorer::default().precision_recall_f1(c)
}

/// Unweighted mean of the per-category F1 scores.
pub fn macro_f1<T: Scalar>(f1s: [T; NUM_CATEGORIES]) -> T {
    let sum = f1s.into_iter().fold(T::zero(), |acc, f| acc + f);
    sum / T::from_count(NUM_CATEGORIES as u64)
}

pub fn evaluate<T: Scalar>(
    preds: &[(TweetIndex, LabelVector)],
    golds: &[(TweetIndex, LabelVector)],
) -> Result<MetricsReportOf<T>, MetricsError> {
    Scorer::default().evaluate(preds, golds)
}

/// Round half away from zero to `places` decimals, for presentation only.
pub fn round_to(value: f64, places: i32) -> f64 {
    let scale = 10f64.powi(places);
    (value * scale).round() / scale
}

impl<T: Scalar> MetricsReportOf<T> {
    /// Values as `f64` in the order Macro-avg, Cat1, Cat2, Cat3.
    pub fn table_row(&self) -> [f64; 4] {
        [
            self.macro_f1.to_f64(),
            self.per_category[0].f1.to_f64(),
            self.per_category[1].f1.to_f64(),
            self.per_category[2].f1.to_f64(),
        ]
    }

    /// JSON-ready view with scores rounded to four decimals.
    pub fn summary(&self) -> ReportSummary {
        let per_category = Category::ALL
            .iter()
            .zip(&self.per_category)
            .zip(&self.counts)
            .map(|((category, s), counts)| CategorySummary {
                category: category.number(),
                precision: round_to(s.precision.to_f64(), 4),
                recall: round_to(s.recall.to_f64(), 4),
                f1: round_to(s.f1.to_f64(), 4),
                counts: *counts,
            })
            .collect();
        ReportSummary {
            per_category,
            macro_f1: round_to(self.macro_f1.to_f64(), 4),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategorySummary {
    pub category: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub counts: ConfusionCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub per_category: Vec<CategorySummary>,
    pub macro_f1: f64,
}

/// Fixed-width table: a header line and one row per labelled report.
pub fn format_table<'a, T: Scalar + 'a>(
    rows: impl IntoIterator<Item = (&'a str, &'a MetricsReportOf<T>)>,
) -> String {
    let rows: Vec<_> = rows.into_iter().collect();
    let width = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max(5);
    let mut out = format!(
        "{:<width$}  {:>12}  {:>8}  {:>8}  {:>8}\n",
        "Model", "Macro-avg F1", "Cat1 F1", "Cat2 F1", "Cat3 F1"
    );
    for (name, report) in rows {
        let [m, c1, c2, c3] = report.table_row();
        out.push_str(&format!(
            "{name:<width$}  {m:>12.4}  {c1:>8.4}  {c2:>8.4}  {c3:>8.4}\n"
        ));
    }
    out
}

impl<T: Scalar> fmt::Display for MetricsReportOf<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_table([("predictions", self)]))
    }
}
