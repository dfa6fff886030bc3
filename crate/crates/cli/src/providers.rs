use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use swd_core::http::{API_KEY_ENV, BASE_URL_ENV, DEFAULT_BASE_URL};
use swd_core::retrieval::{
    EmbeddingProvider, HashProvider, RemoteEmbeddingConfig, RemoteEmbeddingProvider, HASH_PROVIDER_MIN_DIMENSION,
};
use swd_core::{Embedding, ExampleIndex};

use crate::CliError;

pub const DEFAULT_HASH_DIMENSION: usize = 256;
const DEFAULT_REMOTE_DIMENSION: usize = 1536;
const HASH_NAME: &str = "hash-fnv1a-v1";

/// `hash[:dim]` or `openai:<model>[:dim]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProviderChoice {
    Hash { dimension: usize },
    OpenAi { model: String, dimension: usize },
}

impl FromStr for ProviderChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("invalid provider {s:?}: expected hash[:dim] or openai:<model>[:dim]");
        let dim = |d: Option<&str>, default| match d {
            None => Ok(default),
            Some(d) => d.parse::<usize>().map_err(|_| bad()),
        };
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["hash", rest @ ..] if rest.len() <= 1 => {
                let dimension = dim(rest.first().copied(), DEFAULT_HASH_DIMENSION)?;
                if dimension < HASH_PROVIDER_MIN_DIMENSION {
                    return Err(format!("hash provider dimension must be at least {HASH_PROVIDER_MIN_DIMENSION}"));
                }
                Ok(ProviderChoice::Hash { dimension })
            }
            ["openai", model, rest @ ..] if !model.is_empty() && rest.len() <= 1 => Ok(ProviderChoice::OpenAi {
                model: (*model).to_owned(),
                dimension: dim(rest.first().copied(), DEFAULT_REMOTE_DIMENSION)?,
            }),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for ProviderChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProviderChoice::Hash { dimension } => write!(f, "hash:{dimension}"),
            ProviderChoice::OpenAi { model, dimension } => write!(f, "openai:{model}:{dimension}"),
        }
    }
}

impl ProviderChoice {
    /// The provider an index was built with, from its stored name and dimension.
    pub fn for_index(index: &ExampleIndex) -> Result<Self, CliError> {
        let name = index.provider();
        if name == HASH_NAME {
            Ok(ProviderChoice::Hash {
                dimension: index.dimension(),
            })
        } else if let Some(model) = name.strip_prefix("openai:") {
            Ok(ProviderChoice::OpenAi {
                model: model.to_owned(),
                dimension: index.dimension(),
            })
        } else {
            Err(CliError::Input(format!("index built with unknown provider {name:?}; pass --provider")))
        }
    }

    pub fn build(&self, base_url: Option<&str>) -> Result<Box<dyn EmbeddingProvider<Embedding>>, CliError> {
        match self {
            ProviderChoice::Hash { dimension } => Ok(Box::new(HashProvider::new(*dimension))),
            ProviderChoice::OpenAi { model, dimension } => {
                let config = RemoteEmbeddingConfig {
                    base_url: resolve_base_url(base_url),
                    api_key: std::env::var(API_KEY_ENV).ok(),
                    model: model.clone(),
                    dimension: *dimension,
                    timeout: Duration::from_secs(60),
                    batch_size: 64,
                };
                Ok(Box::new(RemoteEmbeddingProvider::new(config).map_err(CliError::input)?))
            }
        }
    }
}

pub fn resolve_base_url(flag: Option<&str>) -> String {
    flag.map(str::to_owned)
        .or_else(|| std::env::var(BASE_URL_ENV).ok())
        .unwrap_or_else(|| DEFAULT_BASE_URL.to_owned())
}
