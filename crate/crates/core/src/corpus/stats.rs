use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::dataset::{Dataset, Split, TweetIndex};
use super::labels::LabelVector;

/// Exclusive Venn regions in report order: 100, 010, 001, 110, 101, 011, 111.
pub const VENN_REGIONS: [[u8; 3]; 7] = [
    [1, 0, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 1, 0],
    [1, 0, 1],
    [0, 1, 1],
    [1, 1, 1],
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub total: usize,
    pub per_category_counts: [usize; 3],
    pub per_category_pct: [f64; 3],
    pub none_count: usize,
    pub venn_region_counts: [usize; 7],
    pub cat2_without_cat3_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("statistics need gold labels, but split {split} is unlabeled")]
pub struct UnlabeledSplit {
    pub split: Split,
}

fn region_of(labels: &LabelVector) -> Option<usize> {
    let bits = labels.bits();
    VENN_REGIONS.iter().position(|r| *r == bits)
}

pub fn compute_stats(ds: &Dataset) -> Result<StatsReport, UnlabeledSplit> {
    if !ds.split().is_labeled() {
        return Err(UnlabeledSplit { split: ds.split() });
    }
    let mut report = StatsReport {
        total: ds.len(),
        per_category_counts: [0; 3],
        per_category_pct: [0.0; 3],
        none_count: 0,
        venn_region_counts: [0; 7],
        cat2_without_cat3_violations: 0,
    };
    for (_, labels) in ds.gold() {
        for (count, bit) in report.per_category_counts.iter_mut().zip(labels.bits()) {
            *count += usize::from(bit);
        }
        match region_of(&labels) {
            Some(region) => report.venn_region_counts[region] += 1,
            None => report.none_count += 1,
        }
        if is_violation(&labels) {
            report.cat2_without_cat3_violations += 1;
        }
    }
    if report.total > 0 {
        for (pct, count) in report.per_category_pct.iter_mut().zip(report.per_category_counts) {
            *pct = count as f64 / report.total as f64;
        }
    }
    Ok(report)
}

fn is_violation(labels: &LabelVector) -> bool {
    labels.reference() && !labels.entity()
}

/// Records labelled as a study reference without an entity mention.
///
/// Reports only; labels are never altered.
pub fn audit_dependency(ds: &Dataset) -> Vec<TweetIndex> {
    ds.gold()
        .filter(|(_, labels)| is_violation(labels))
        .map(|(index, _)| index)
        .collect()
}

impl fmt::Display for StatsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const NAMES: [&str; 3] = ["Cat1 scientific claim", "Cat2 study reference", "Cat3 entity mention"];
        let pct = |n: usize| {
            if self.total == 0 {
                0.0
            } else {
                100.0 * n as f64 / self.total as f64
            }
        };
        writeln!(f, "{:<26}{:>8}{:>9}", "category", "count", "pct")?;
        for (name, count) in NAMES.iter().zip(self.per_category_counts) {
            writeln!(f, "{name:<26}{count:>8}{:>8.1}%", pct(count))?;
        }
        writeln!(f, "{:<26}{:>8}{:>8.1}%", "none", self.none_count, pct(self.none_count))?;
        writeln!(f, "{:<26}{:>8}", "total", self.total)?;
        writeln!(f)?;
        writeln!(f, "{:<26}{:>8}", "venn region (c1 c2 c3)", "count")?;
        for (region, count) in VENN_REGIONS.iter().zip(self.venn_region_counts) {
            let code: String = region.iter().map(|b| b.to_string()).collect();
            writeln!(f, "{code:<26}{count:>8}")?;
        }
        write!(
            f,
            "{:<26}{:>8}",
            "cat2 without cat3", self.cat2_without_cat3_violations
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Tweet;
    use proptest::prelude::*;

    fn ds(bits: &[[u8; 3]]) -> Dataset {
        Dataset::labeled(
            Split::Train,
            bits.iter()
                .enumerate()
                .map(|(i, b)| (Tweet::new(i as u64, format!("t{i}")), LabelVector::from_bits(*b))),
        )
        .unwrap()
    }

    #[test]
    fn empty_dataset() {
        let r = compute_stats(&ds(&[])).unwrap();
        assert_eq!(r.total, 0);
        assert_eq!(r.per_category_counts, [0; 3]);
        assert_eq!(r.per_category_pct, [0.0; 3]);
        assert_eq!(r.none_count, 0);
        assert_eq!(r.venn_region_counts, [0; 7]);
    }

    #[test]
    fn counts_regions() {
        let r = compute_stats(&ds(&[[1, 0, 0], [0, 1, 1], [0, 1, 0], [0, 0, 0], [1, 1, 1]])).unwrap();
        assert_eq!(r.per_category_counts, [2, 3, 2]);
        assert_eq!(r.none_count, 1);
        assert_eq!(r.venn_region_counts, [1, 1, 0, 0, 0, 1, 1]);
        assert_eq!(r.cat2_without_cat3_violations, 1);
        assert!((r.per_category_pct[1] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn unlabeled_split_is_an_error() {
        let eval = Dataset::new(
            Split::Eval,
            vec![crate::corpus::Record { tweet: Tweet::new(1, "x"), labels: None }],
        )
        .unwrap();
        assert_eq!(compute_stats(&eval), Err(UnlabeledSplit { split: Split::Eval }));
    }

    #[test]
    fn dependency_audit() {
        let d = ds(&[[0, 1, 1], [0, 1, 0], [1, 1, 0], [0, 0, 1]]);
        assert_eq!(audit_dependency(&d), vec![TweetIndex(1), TweetIndex(2)]);
        assert!(audit_dependency(&ds(&[[0, 1, 1]])).is_empty());
    }

    proptest! {
        #[test]
        fn regions_partition_total(bits in proptest::collection::vec(proptest::array::uniform3(0u8..2), 0..300)) {
            let r = compute_stats(&ds(&bits)).unwrap();
            prop_assert_eq!(r.venn_region_counts.iter().sum::<usize>() + r.none_count, r.total);
            for (c, count) in r.per_category_counts.iter().enumerate() {
                let from_regions: usize = VENN_REGIONS
                    .iter()
                    .zip(r.venn_region_counts)
                    .filter(|(region, _)| region[c] == 1)
                    .map(|(_, n)| n)
                    .sum();
                prop_assert_eq!(*count, from_regions);
            }
            prop_assert_eq!(r.cat2_without_cat3_violations, r.venn_region_counts[1] + r.venn_region_counts[3]);
        }
    }
}
