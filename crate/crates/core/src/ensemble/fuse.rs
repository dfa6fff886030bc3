use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Category, LabelVector, TweetIndex};

/// Which model supplies a category's final label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Transformer,
    Llm,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Transformer => "T",
            Source::Llm => "L",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid routing {input:?}: expected three comma-separated sources, each T/transformer or L/llm")]
pub struct RoutingParseError {
    pub input: String,
}

impl FromStr for Source {
    type Err = RoutingParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "t" | "transformer" => Ok(Source::Transformer),
            "l" | "llm" => Ok(Source::Llm),
            _ => Err(RoutingParseError { input: s.to_owned() }),
        }
    }
}

/// One source per category, in category order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct RoutingConfig(pub [Source; 3]);

impl Default for RoutingConfig {
    fn default() -> Self {
        RoutingConfig([Source::Transformer, Source::Llm, Source::Transformer])
    }
}

impl RoutingConfig {
    pub const ALL_TRANSFORMER: RoutingConfig = RoutingConfig([Source::Transformer; 3]);
    pub const ALL_LLM: RoutingConfig = RoutingConfig([Source::Llm; 3]);

    pub fn source(&self, category: Category) -> Source {
        self.0[category.position()]
    }

    pub fn uses(&self, source: Source) -> bool {
        self.0.contains(&source)
    }

    /// All 8 routings.
    pub fn all() -> impl Iterator<Item = RoutingConfig> {
        (0u8..8).map(|m| {
            RoutingConfig([0, 1, 2].map(|i| {
                if m >> (2 - i) & 1 == 1 {
                    Source::Llm
                } else {
                    Source::Transformer
                }
            }))
        })
    }
}

impl fmt::Display for RoutingConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c] = self.0;
        write!(f, "{a},{b},{c}")
    }
}

impl FromStr for RoutingConfig {
    type Err = RoutingParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || RoutingParseError { input: s.to_owned() };
        let parts: Vec<&str> = s.split(',').collect();
        let [a, b, c] = parts.as_slice() else {
            return Err(err());
        };
        Ok(RoutingConfig([a.parse().map_err(|_| err())?, b.parse().map_err(|_| err())?, c.parse().map_err(|_| err())?]))
    }
}

impl From<RoutingConfig> for String {
    fn from(r: RoutingConfig) -> String {
        r.to_string()
    }
}

impl TryFrom<String> for RoutingConfig {
    type Error = RoutingParseError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// Componentwise selection by routing.
pub fn fuse(transformer: LabelVector, llm: LabelVector, routing: &RoutingConfig) -> LabelVector {
    let mut out = LabelVector::NONE;
    for c in Category::ALL {
        let v = match routing.source(c) {
            Source::Transformer => transformer.get(c),
            Source::Llm => llm.get(c),
        };
        out.set(c, v);
    }
    out
}

/// Force entity=1 wherever reference=1. Returns the vector and whether it changed.
pub fn enforce_dependency(v: LabelVector) -> (LabelVector, bool) {
    if v.reference() && !v.entity() {
        (v.with(Category::Entity, true), true)
    } else {
        (v, false)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FuseError {
    #[error("routing {routing} needs {needed:?} predictions for {} tweet(s), first {}", missing.len(), missing[0])]
    Missing {
        routing: RoutingConfig,
        needed: Source,
        missing: Vec<TweetIndex>,
    },
}

/// Fuse two prediction tables. Output follows the order of the first table
/// the routing uses; every index in it must be present in the other used
/// table.
pub fn fuse_tables(
    transformer: &[(TweetIndex, LabelVector)],
    llm: &[(TweetIndex, LabelVector)],
    routing: &RoutingConfig,
) -> Result<Vec<(TweetIndex, LabelVector)>, FuseError> {
    let t_map: HashMap<_, _> = transformer.iter().copied().collect();
    let l_map: HashMap<_, _> = llm.iter().copied().collect();
    let (order, other, other_source) = if routing.uses(Source::Transformer) {
        (transformer, &l_map, Source::Llm)
    } else {
        (llm, &t_map, Source::Transformer)
    };
    if routing.uses(other_source) {
        let missing: Vec<TweetIndex> = order.iter().map(|(i, _)| *i).filter(|i| !other.contains_key(i)).collect();
        if !missing.is_empty() {
            return Err(FuseError::Missing {
                routing: *routing,
                needed: other_source,
                missing,
            });
        }
    }
    Ok(order
        .iter()
        .map(|(i, _)| {
            let t = t_map.get(i).copied().unwrap_or(LabelVector::NONE);
            let l = l_map.get(i).copied().unwrap_or(LabelVector::NONE);
            (*i, fuse(t, l, routing))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lv(bits: [u8; 3]) -> LabelVector {
        LabelVector::from_bits(bits)
    }

    #[test]
    fn default_routing_takes_reference_from_llm() {
        assert_eq!(fuse(lv([1, 0, 1]), lv([0, 1, 0]), &RoutingConfig::default()), lv([1, 1, 1]));
        for r in RoutingConfig::all() {
            assert_eq!(fuse(LabelVector::NONE, LabelVector::NONE, &r), LabelVector::NONE);
        }
    }

    #[test]
    fn all_transformer_is_projection() {
        for t in LabelVector::all() {
            for l in LabelVector::all() {
                assert_eq!(fuse(t, l, &RoutingConfig::ALL_TRANSFORMER), t);
                assert_eq!(fuse(t, l, &RoutingConfig::ALL_LLM), l);
            }
        }
    }

    #[test]
    fn routing_soundness_exhaustive() {
        for r in RoutingConfig::all() {
            for t in LabelVector::all() {
                for l in LabelVector::all() {
                    let f = fuse(t, l, &r);
                    for c in Category::ALL {
                        let want = match r.source(c) {
                            Source::Transformer => t.get(c),
                            Source::Llm => l.get(c),
                        };
                        assert_eq!(f.get(c), want);
                    }
                }
            }
        }
    }

    #[test]
    fn routing_text() {
        assert_eq!(RoutingConfig::default().to_string(), "T,L,T");
        assert_eq!("t, llm ,Transformer".parse::<RoutingConfig>().unwrap(), RoutingConfig::default());
        assert!("T,L".parse::<RoutingConfig>().is_err());
        assert!("T,L,X".parse::<RoutingConfig>().is_err());
        assert_eq!(RoutingConfig::all().count(), 8);
        for r in RoutingConfig::all() {
            assert_eq!(r.to_string().parse::<RoutingConfig>().unwrap(), r);
            let json = serde_json::to_string(&r).unwrap();
            assert_eq!(serde_json::from_str::<RoutingConfig>(&json).unwrap(), r);
        }
    }

    #[test]
    fn dependency_rule() {
        assert_eq!(enforce_dependency(lv([0, 1, 0])), (lv([0, 1, 1]), true));
        assert_eq!(enforce_dependency(lv([1, 0, 0])), (lv([1, 0, 0]), false));
        assert_eq!(enforce_dependency(lv([0, 1, 1])), (lv([0, 1, 1]), false));
    }

    #[test]
    fn tables() {
        let t = vec![(TweetIndex(2), lv([1, 0, 1])), (TweetIndex(1), lv([0, 0, 1]))];
        let l = vec![(TweetIndex(1), lv([1, 1, 0])), (TweetIndex(2), lv([0, 1, 0]))];
        let fused = fuse_tables(&t, &l, &RoutingConfig::default()).unwrap();
        assert_eq!(fused, vec![(TweetIndex(2), lv([1, 1, 1])), (TweetIndex(1), lv([0, 1, 1]))]);
        assert_eq!(fuse_tables(&t, &[], &RoutingConfig::ALL_TRANSFORMER).unwrap(), t);
        let err = fuse_tables(&t, &l[..1], &RoutingConfig::default()).unwrap_err();
        assert_eq!(
            err,
            FuseError::Missing {
                routing: RoutingConfig::default(),
                needed: Source::Llm,
                missing: vec![TweetIndex(2)],
            }
        );
    }

    proptest! {
        #[test]
        fn category_isolation(t in 0u8..8, l1 in 0u8..8, l2 in 0u8..8) {
            let r = RoutingConfig::default();
            let all: Vec<LabelVector> = LabelVector::all().collect();
            let t = all[t as usize];
            let a = fuse(t, all[l1 as usize], &r);
            let b = fuse(t, all[l2 as usize], &r);
            prop_assert_eq!(a.claim(), b.claim());
            prop_assert_eq!(a.entity(), b.entity());
        }
    }
}
