use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use num_traits::Float;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::provider::{EmbedError, EmbeddingProvider};
use crate::corpus::{Dataset, LabelVector, Tweet, TweetIndex};

/// Tag written in the first line of every persisted index.
pub const INDEX_FORMAT: &str = "swd-example-index/v1";

/// Allowed deviation of a stored vector's norm from 1.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-6;

/// A labelled training tweet with its unit-length embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedExample<F> {
    pub tweet: Tweet,
    pub labels: LabelVector,
    pub vector: Vec<F>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredExample<F> {
    pub example: EmbeddedExample<F>,
    pub similarity: F,
}

impl<F> ScoredExample<F> {
    pub fn index(&self) -> TweetIndex {
        self.example.tweet.index
    }
}

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("record {index} has no labels; shots must carry classifications")]
    Unlabeled { index: TweetIndex },
    #[error("embedding tweet {index} failed: {source}")]
    Provider {
        index: TweetIndex,
        #[source]
        source: EmbedError,
    },
    #[error("embedding the query failed: {0}")]
    Query(#[source] EmbedError),
    #[error("tweet {index} embeds to the zero vector and cannot be normalised")]
    ZeroVector { index: TweetIndex },
    #[error("query text embeds to the zero vector")]
    ZeroQuery,
    #[error("provider returned {found} components for tweet {index}, expected {expected}")]
    Dimension {
        index: TweetIndex,
        expected: usize,
        found: usize,
    },
    #[error("index was built with {index_provider}/{index_dimension}, query provider is {provider}/{dimension}")]
    ProviderMismatch {
        index_provider: String,
        index_dimension: usize,
        provider: String,
        dimension: usize,
    },
    #[error("the example index is empty")]
    EmptyIndex,
    #[error("k must be at least 1")]
    ZeroK,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

/// Outcome of embedding a training split.
#[derive(Debug)]
pub struct IndexBuild<F> {
    pub index: ExampleIndexOf<F>,
    /// Records left out because their embedding could not be normalised.
    pub rejected: Vec<RetrievalError>,
}

/// Exhaustive cosine-similarity store over labelled examples.
#[derive(Debug, Clone, PartialEq)]
pub struct ExampleIndexOf<F> {
    provider: String,
    dimension: usize,
    entries: Vec<EmbeddedExample<F>>,
}

fn normalize<F: Float>(mut v: Vec<F>) -> Option<Vec<F>> {
    let norm = v.iter().fold(F::zero(), |acc, &x| acc + x * x).sqrt();
    if norm == F::zero() || !norm.is_finite() {
        return None;
    }
    for x in &mut v {
        *x = *x / norm;
    }
    Some(v)
}

fn dot<F: Float>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).fold(F::zero(), |acc, (&x, &y)| acc + x * y)
}

fn clamp_unit<F: Float>(x: F) -> F {
    x.max(-F::one()).min(F::one())
}

/// Heap entry ordered so that the *worst* candidate sits on top.
struct Candidate<F> {
    similarity: F,
    position: usize,
    index: TweetIndex,
}

impl<F: Float> Candidate<F> {
    /// Better means higher similarity, then lower tweet index.
    fn better_than(&self, other: &Self) -> Ordering {
        self.similarity
            .partial_cmp(&other.similarity)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.index.cmp(&self.index))
    }
}

impl<F: Float> PartialEq for Candidate<F> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<F: Float> Eq for Candidate<F> {}

impl<F: Float> PartialOrd for Candidate<F> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<F: Float> Ord for Candidate<F> {
    fn cmp(&self, other: &Self) -> Ordering {
        // Max-heap on "worse".
        other.better_than(self)
    }
}

/// Embed every record of a labelled dataset.
///
/// Records whose embedding is the zero vector are rejected and reported;
/// provider failures abort the build.
pub fn build_index<F, P>(examples: &Dataset, provider: &P) -> Result<IndexBuild<F>, RetrievalError>
where
    F: Float,
    P: EmbeddingProvider<F> + ?Sized,
{
    let records = examples.records();
    if let Some(r) = records.iter().find(|r| r.labels.is_none()) {
        return Err(RetrievalError::Unlabeled { index: r.tweet.index });
    }
    let dimension = provider.dimension();
    let mut entries = Vec::with_capacity(records.len());
    let mut rejected = Vec::new();
    const CHUNK: usize = 64;
    for chunk in records.chunks(CHUNK) {
        let texts: Vec<&str> = chunk.iter().map(|r| r.tweet.text.as_str()).collect();
        let vectors = provider.embed_batch(&texts).map_err(|source| RetrievalError::Provider {
            index: chunk[0].tweet.index,
            source,
        })?;
        for (record, vector) in chunk.iter().zip(vectors) {
            let index = record.tweet.index;
            if vector.len() != dimension {
                return Err(RetrievalError::Dimension {
                    index,
                    expected: dimension,
                    found: vector.len(),
                });
            }
            match normalize(vector) {
                Some(vector) => entries.push(EmbeddedExample {
                    tweet: record.tweet.clone(),
                    labels: record.labels.expect("checked above"),
                    vector,
                }),
                None => rejected.push(RetrievalError::ZeroVector { index }),
            }
        }
    }
    Ok(IndexBuild {
        index: ExampleIndexOf {
            provider: provider.name().to_owned(),
            dimension,
            entries,
        },
        rejected,
    })
}

impl<F: Float> ExampleIndexOf<F> {
    pub fn provider(&self) -> &str {
        &self.provider
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[EmbeddedExample<F>] {
        &self.entries
    }

    pub fn contains(&self, index: TweetIndex) -> bool {
        self.entries.iter().any(|e| e.tweet.index == index)
    }

    pub fn check_provider<P>(&self, provider: &P) -> Result<(), RetrievalError>
    where
        P: EmbeddingProvider<F> + ?Sized,
    {
        if provider.name() != self.provider || provider.dimension() != self.dimension {
            return Err(RetrievalError::ProviderMismatch {
                index_provider: self.provider.clone(),
                index_dimension: self.dimension,
                provider: provider.name().to_owned(),
                dimension: provider.dimension(),
            });
        }
        Ok(())
    }

    /// Unit-normalised embedding of a query text.
    pub fn embed_query<P>(&self, query_text: &str, provider: &P) -> Result<Vec<F>, RetrievalError>
    where
        P: EmbeddingProvider<F> + ?Sized,
    {
        self.check_provider(provider)?;
        let raw = provider.embed(query_text).map_err(RetrievalError::Query)?;
        if raw.len() != self.dimension {
            return Err(RetrievalError::Query(EmbedError::Dimension {
                expected: self.dimension,
                found: raw.len(),
            }));
        }
        normalize(raw).ok_or(RetrievalError::ZeroQuery)
    }

    /// The `k` most similar examples, best first, ties broken by ascending
    /// tweet index.
    pub fn top_k<P>(&self, query_text: &str, k: usize, provider: &P) -> Result<Vec<ScoredExample<F>>, RetrievalError>
    where
        P: EmbeddingProvider<F> + ?Sized,
    {
        self.top_k_excluding(query_text, k, provider, None)
    }

    /// As [`top_k`](Self::top_k), skipping the stored example with index
    /// `exclude` (leave-one-out when querying with a stored tweet).
    pub fn top_k_excluding<P>(
        &self,
        query_text: &str,
        k: usize,
        provider: &P,
        exclude: Option<TweetIndex>,
    ) -> Result<Vec<ScoredExample<F>>, RetrievalError>
    where
        P: EmbeddingProvider<F> + ?Sized,
    {
        if k == 0 {
            return Err(RetrievalError::ZeroK);
        }
        if self.entries.is_empty() {
            return Err(RetrievalError::EmptyIndex);
        }
        let query = self.embed_query(query_text, provider)?;
        Ok(self.top_k_by_vector(&query, k, exclude))
    }

    /// Ranking against an already-normalised query vector.
    pub fn top_k_by_vector(&self, query: &[F], k: usize, exclude: Option<TweetIndex>) -> Vec<ScoredExample<F>> {
        let mut heap: BinaryHeap<Candidate<F>> = BinaryHeap::with_capacity(k + 1);
        for (position, entry) in self.entries.iter().enumerate() {
            if Some(entry.tweet.index) == exclude {
                continue;
            }
            let candidate = Candidate {
                similarity: clamp_unit(dot(query, &entry.vector)),
                position,
                index: entry.tweet.index,
            };
            if heap.len() < k {
                heap.push(candidate);
            } else if let Some(worst) = heap.peek() {
                if candidate.better_than(worst) == Ordering::Greater {
                    heap.pop();
                    heap.push(candidate);
                }
            }
        }
        // into_sorted_vec is ascending by Ord, i.e. best first.
        heap.into_sorted_vec()
            .into_iter()
            .map(|c| ScoredExample {
                example: self.entries[c.position].clone(),
                similarity: c.similarity,
            })
            .collect()
    }
}

#[derive(Serialize, Deserialize)]
struct IndexHeader {
    format: String,
    provider: String,
    dimension: usize,
    count: usize,
}

impl<F: Float + Serialize + DeserializeOwned> ExampleIndexOf<F> {
    /// Write the index as JSON lines: a header, then one record per line.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), RetrievalError> {
        let path = path.as_ref();
        let io = |source| RetrievalError::Io {
            path: path.to_owned(),
            source,
        };
        let mut out = BufWriter::new(File::create(path).map_err(io)?);
        let header = IndexHeader {
            format: INDEX_FORMAT.to_owned(),
            provider: self.provider.clone(),
            dimension: self.dimension,
            count: self.entries.len(),
        };
        out.write_all(json_line(&header).as_bytes()).map_err(io)?;
        for entry in &self.entries {
            let record = IndexRecord {
                index: entry.tweet.index,
                text: &entry.tweet.text,
                labels: entry.labels,
                vector: &entry.vector,
            };
            out.write_all(json_line(&record).as_bytes()).map_err(io)?;
        }
        out.flush().map_err(io)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RetrievalError> {
        let path = path.as_ref();
        let io = |source| RetrievalError::Io {
            path: path.to_owned(),
            source,
        };
        let format = |line: usize, message: String| RetrievalError::Format {
            path: path.to_owned(),
            line,
            message,
        };
        let reader = BufReader::new(File::open(path).map_err(io)?);
        let mut lines = reader.lines().enumerate();
        let header_line = match lines.next() {
            Some((_, l)) => l.map_err(io)?,
            None => return Err(format(1, "missing header".into())),
        };
        let header: IndexHeader = serde_json::from_str(&header_line).map_err(|e| format(1, e.to_string()))?;
        if header.format != INDEX_FORMAT {
            return Err(format(1, format!("unsupported format tag {:?}", header.format)));
        }
        let mut entries = Vec::with_capacity(header.count);
        for (i, line) in lines {
            let line = line.map_err(io)?;
            if line.trim().is_empty() {
                continue;
            }
            let record: OwnedIndexRecord<F> =
                serde_json::from_str(&line).map_err(|e| format(i + 1, e.to_string()))?;
            if record.vector.len() != header.dimension {
                return Err(format(
                    i + 1,
                    format!("vector has {} components, header says {}", record.vector.len(), header.dimension),
                ));
            }
            let norm = record
                .vector
                .iter()
                .map(|x| x.to_f64().unwrap_or(f64::NAN).powi(2))
                .sum::<f64>()
                .sqrt();
            if norm.is_nan() || (norm - 1.0).abs() > UNIT_NORM_TOLERANCE {
                return Err(format(i + 1, format!("vector norm {norm} is not 1")));
            }
            entries.push(EmbeddedExample {
                tweet: Tweet {
                    index: record.index,
                    text: record.text,
                },
                labels: record.labels,
                vector: record.vector,
            });
        }
        if entries.len() != header.count {
            return Err(format(
                1,
                format!("header count {} but {} records", header.count, entries.len()),
            ));
        }
        Ok(ExampleIndexOf {
            provider: header.provider,
            dimension: header.dimension,
            entries,
        })
    }
}

#[derive(Serialize)]
struct IndexRecord<'a, F> {
    index: TweetIndex,
    text: &'a str,
    labels: LabelVector,
    vector: &'a [F],
}

#[derive(Deserialize)]
struct OwnedIndexRecord<F> {
    index: TweetIndex,
    text: String,
    labels: LabelVector,
    vector: Vec<F>,
}

fn json_line<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string(value).expect("index records serialise");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Split;
    use crate::retrieval::HashProvider;

    fn corpus(texts: &[&str]) -> Dataset {
        Dataset::labeled(
            Split::Train,
            texts.iter().enumerate().map(|(i, t)| {
                (Tweet::new(i as u64 + 1, *t), LabelVector::from_bits([0, (i % 2) as u8, (i % 2) as u8]))
            }),
        )
        .unwrap()
    }

    #[test]
    fn builds_unit_vectors() {
        let p = HashProvider::new(64);
        let build = build_index::<f64, _>(&corpus(&["new study on vaccines", "football tonight", "MIT scientists say"]), &p).unwrap();
        assert_eq!(build.index.len(), 3);
        assert!(build.rejected.is_empty());
        for e in build.index.entries() {
            let n: f64 = e.vector.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() <= UNIT_NORM_TOLERANCE);
        }
        assert_eq!(build.index.provider(), "hash-fnv1a-v1");
    }

    #[test]
    fn self_query_ranks_first() {
        let p = HashProvider::new(64);
        let idx = build_index::<f64, _>(&corpus(&["alpha beta", "gamma delta", "alpha gamma"]), &p).unwrap().index;
        let hits = idx.top_k("gamma delta", 2, &p).unwrap();
        assert_eq!(hits[0].index(), TweetIndex(2));
        assert!((hits[0].similarity - 1.0).abs() < 1e-12);
        assert!(hits[0].similarity >= hits[1].similarity);
    }

    #[test]
    fn truncates_to_index_size() {
        let p = HashProvider::new(32);
        let idx = build_index::<f32, _>(&corpus(&["a", "b", "c"]), &p).unwrap().index;
        assert_eq!(idx.top_k("a b", 5, &p).unwrap().len(), 3);
    }

    #[test]
    fn ties_break_by_index() {
        let p = HashProvider::new(32);
        let idx = build_index::<f64, _>(&corpus(&["same words", "same words", "same words"]), &p).unwrap().index;
        let hits: Vec<_> = idx.top_k("same words", 3, &p).unwrap().iter().map(|h| h.index().0).collect();
        assert_eq!(hits, vec![1, 2, 3]);
    }

    #[test]
    fn leave_one_out() {
        let p = HashProvider::new(64);
        let idx = build_index::<f64, _>(&corpus(&["alpha beta", "gamma delta"]), &p).unwrap().index;
        let hits = idx.top_k_excluding("alpha beta", 5, &p, Some(TweetIndex(1))).unwrap();
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].index(), TweetIndex(2));
    }

    #[test]
    fn error_paths() {
        let p = HashProvider::new(64);
        let empty = build_index::<f64, _>(&corpus(&[]), &p).unwrap().index;
        assert!(empty.is_empty());
        assert!(matches!(empty.top_k("x", 1, &p), Err(RetrievalError::EmptyIndex)));

        let build = build_index::<f64, _>(&corpus(&["ok text", "?!", "more"]), &p).unwrap();
        assert_eq!(build.index.len(), 2);
        assert!(matches!(build.rejected[..], [RetrievalError::ZeroVector { index: TweetIndex(2) }]));

        let other = HashProvider::new(128);
        assert!(matches!(build.index.top_k("ok", 1, &other), Err(RetrievalError::ProviderMismatch { .. })));
        assert!(matches!(build.index.top_k("ok", 0, &p), Err(RetrievalError::ZeroK)));
        assert!(matches!(build.index.top_k("...", 1, &p), Err(RetrievalError::ZeroQuery)));

        let eval = Dataset::new(
            Split::Eval,
            vec![crate::corpus::Record { tweet: Tweet::new(1, "x"), labels: None }],
        )
        .unwrap();
        assert!(matches!(build_index::<f64, _>(&eval, &p), Err(RetrievalError::Unlabeled { .. })));
    }

    #[test]
    fn persistence_round_trip() {
        let p = HashProvider::new(16);
        let idx = build_index::<f64, _>(&corpus(&["one tweet", "two tweet", "red fish"]), &p).unwrap().index;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("index.jsonl");
        idx.save(&path).unwrap();
        let back = ExampleIndexOf::<f64>::load(&path).unwrap();
        assert_eq!(back, idx);

        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.lines().next().unwrap().contains(INDEX_FORMAT));
        std::fs::write(&path, text.replace(INDEX_FORMAT, "other/v9")).unwrap();
        assert!(matches!(ExampleIndexOf::<f64>::load(&path), Err(RetrievalError::Format { line: 1, .. })));
        assert!(matches!(
            ExampleIndexOf::<f64>::load(dir.path().join("missing.jsonl")),
            Err(RetrievalError::Io { .. })
        ));
    }
}
