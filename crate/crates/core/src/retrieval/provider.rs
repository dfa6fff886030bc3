use std::time::Duration;

use num_traits::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::http::{HttpClient, HttpError};

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("embedding request failed: {0}")]
    Http(#[from] HttpError),
    #[error("embedding response malformed: {0}")]
    Malformed(String),
    #[error("provider returned {found} components, expected {expected}")]
    Dimension { expected: usize, found: usize },
    #[error("provider returned a non-finite component")]
    NonFinite,
}

/// A deterministic text embedding function of fixed output dimension.
pub trait EmbeddingProvider<F>: Send + Sync {
    /// Identifier persisted in the index for compatibility checks.
    fn name(&self) -> &str;

    fn dimension(&self) -> usize;

    fn embed(&self, text: &str) -> Result<Vec<F>, EmbedError>;

    /// Embed several texts; providers with a batch endpoint override this.
    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<F>>, EmbedError> {
        texts.iter().map(|t| self.embed(t)).collect()
    }
}

/// Offline feature-hashing embedder.
///
/// Lowercased text is split on non-alphanumeric characters; each token adds a
/// signed unit to one bucket chosen by a seeded FNV-1a hash. Output is the
/// raw bucket vector; the index normalises it. Identical token multisets give
/// identical vectors on every platform.
#[derive(Debug, Clone)]
pub struct HashProvider {
    dimension: usize,
    name: String,
}

pub const HASH_PROVIDER_MIN_DIMENSION: usize = 8;
const HASH_SEED: u64 = 0x5eed_7a3e_c0de_0001;

impl HashProvider {
    /// # Panics
    /// If `dimension < 8`.
    pub fn new(dimension: usize) -> Self {
        assert!(
            dimension >= HASH_PROVIDER_MIN_DIMENSION,
            "hash provider dimension must be at least {HASH_PROVIDER_MIN_DIMENSION}"
        );
        HashProvider {
            dimension,
            name: "hash-fnv1a-v1".to_owned(),
        }
    }
}

/// Convenience constructor mirroring the other providers.
pub fn hash_provider(dimension: usize) -> HashProvider {
    HashProvider::new(dimension)
}

fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = 0xcbf2_9ce4_8422_2325 ^ seed;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(PRIME);
    }
    // Final avalanche so low bits depend on every input byte.
    h ^= h >> 33;
    h = h.wrapping_mul(0xff51_afd7_ed55_8ccd);
    h ^= h >> 33;
    h
}

fn tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

impl<F: Float> EmbeddingProvider<F> for HashProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<Vec<F>, EmbedError> {
        let mut acc = vec![0i64; self.dimension];
        for token in tokens(text) {
            let h = fnv1a(HASH_SEED, token.as_bytes());
            let bucket = (h % self.dimension as u64) as usize;
            acc[bucket] += if h >> 63 == 0 { 1 } else { -1 };
        }
        acc.into_iter()
            .map(|v| F::from(v).ok_or(EmbedError::NonFinite))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RemoteEmbeddingConfig {
    pub base_url: String,
    pub api_key: Option<String>,
    pub model: String,
    pub dimension: usize,
    pub timeout: Duration,
    pub batch_size: usize,
}

/// Client for an OpenAI-compatible `POST {base}/embeddings` endpoint.
pub struct RemoteEmbeddingProvider {
    config: RemoteEmbeddingConfig,
    name: String,
    client: HttpClient,
}

#[derive(Serialize)]
struct EmbeddingRequest<'a> {
    model: &'a str,
    input: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    #[serde(default)]
    index: Option<usize>,
    embedding: Vec<f64>,
}

impl RemoteEmbeddingProvider {
    pub fn new(config: RemoteEmbeddingConfig) -> Result<Self, HttpError> {
        let client = HttpClient::new(&config.base_url, config.api_key.clone(), config.timeout)?;
        let name = format!("openai:{}", config.model);
        Ok(RemoteEmbeddingProvider { config, name, client })
    }

    fn request(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, EmbedError> {
        let body = serde_json::to_value(EmbeddingRequest {
            model: &self.config.model,
            input: texts,
        })
        .map_err(|e| EmbedError::Malformed(e.to_string()))?;
        let raw = self.client.post_json("embeddings", &body)?;
        let mut parsed: EmbeddingResponse =
            serde_json::from_value(raw).map_err(|e| EmbedError::Malformed(e.to_string()))?;
        if parsed.data.len() != texts.len() {
            return Err(EmbedError::Malformed(format!(
                "{} embeddings for {} inputs",
                parsed.data.len(),
                texts.len()
            )));
        }
        if parsed.data.iter().all(|d| d.index.is_some()) {
            parsed.data.sort_by_key(|d| d.index);
        }
        Ok(parsed.data.into_iter().map(|d| d.embedding).collect())
    }

    fn convert<F: Float>(&self, v: Vec<f64>) -> Result<Vec<F>, EmbedError> {
        if v.len() != self.config.dimension {
            return Err(EmbedError::Dimension {
                expected: self.config.dimension,
                found: v.len(),
            });
        }
        v.into_iter()
            .map(|x| F::from(x).filter(|y| y.is_finite()).ok_or(EmbedError::NonFinite))
            .collect()
    }
}

impl<F: Float> EmbeddingProvider<F> for RemoteEmbeddingProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn dimension(&self) -> usize {
        self.config.dimension
    }

    fn embed(&self, text: &str) -> Result<Vec<F>, EmbedError> {
        let mut out = <Self as EmbeddingProvider<F>>::embed_batch(self, &[text])?;
        Ok(out.pop().expect("one embedding per input"))
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<F>>, EmbedError> {
        let mut out = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(self.config.batch_size.max(1)) {
            for v in self.request(chunk)? {
                out.push(self.convert(v)?);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cosine(a: &[f64], b: &[f64]) -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        dot / (na * nb)
    }

    #[test]
    fn deterministic_and_order_insensitive() {
        let p = HashProvider::new(64);
        let a: Vec<f64> = p.embed("New study from MIT").unwrap();
        let b: Vec<f64> = p.embed("New study from MIT").unwrap();
        assert_eq!(a, b);
        let ab: Vec<f64> = p.embed("a b").unwrap();
        let ba: Vec<f64> = p.embed("b a").unwrap();
        assert_eq!(ab, ba);
        let upper: Vec<f64> = p.embed("A, B!").unwrap();
        assert_eq!(ab, upper);
    }

    #[test]
    fn distinct_texts_are_not_parallel() {
        let p = HashProvider::new(64);
        let a: Vec<f64> = p.embed("covid study").unwrap();
        let b: Vec<f64> = p.embed("football score").unwrap();
        assert!(cosine(&a, &b) < 1.0);
    }

    #[test]
    fn fixed_dimension_and_f32_support() {
        let p = HashProvider::new(16);
        let v: Vec<f32> = p.embed("one two three four").unwrap();
        assert_eq!(v.len(), 16);
        assert_eq!(<HashProvider as EmbeddingProvider<f32>>::dimension(&p), 16);
        let empty: Vec<f32> = p.embed("!!!").unwrap();
        assert!(empty.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn stable_across_builds() {
        // Pinned bucket layout; changing the hash invalidates persisted indices.
        let p = HashProvider::new(8);
        let v: Vec<f64> = p.embed("science").unwrap();
        let h = fnv1a(HASH_SEED, b"science");
        let mut expected = vec![0.0; 8];
        expected[(h % 8) as usize] = if h >> 63 == 0 { 1.0 } else { -1.0 };
        assert_eq!(v, expected);
        assert_eq!(fnv1a(0, b""), {
            let mut h: u64 = 0xcbf2_9ce4_8422_2325;
            h ^= h >> 33;
            h = h.wrapping_mul(0xff51_afd7_ed55_8ccd);
            h ^ (h >> 33)
        });
    }

    #[test]
    #[should_panic(expected = "at least 8")]
    fn tiny_dimension_rejected() {
        HashProvider::new(4);
    }
}
