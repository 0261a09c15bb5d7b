//! Embedding and NLI backends behind swappable trait contracts.
//!
//! The default backends are fully deterministic (signed hashed
//! bag-of-words, rule-based NLI) so the pipeline runs bit-identically
//! with no model weights; a remote HTTP client and a latency-simulating
//! wrapper plug in behind the same traits. All calls go through a shared
//! cache first.

mod cache;
mod hashed;
mod remote;
mod simulated;

pub use cache::{Cache, CacheStats};
pub use hashed::{HashedBowEmbedder, RuleNli};
pub use remote::{RemoteEmbedder, RemoteNli};
pub use simulated::{SimulatedEmbedder, SimulatedNli};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::num::Real;

/// Default embedding dimension of the hashed bag-of-words backend.
pub const DEFAULT_DIM: usize = 256;

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("remote backend at {endpoint} failed after {attempts} attempts: {detail}")]
    Remote {
        endpoint: String,
        attempts: u32,
        detail: String,
    },
    #[error("embedding dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("malformed backend response: {0}")]
    BadResponse(String),
    #[error("cache file error: {0}")]
    CacheFile(String),
    #[error("backend misconfigured: {0}")]
    Config(String),
}

/// L2-normalized embedding; the all-zero vector stands for empty text.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector<F> {
    values: Vec<F>,
    norm: F,
}

impl<F: Real> EmbeddingVector<F> {
    /// Normalize raw values; an all-zero input stays all-zero.
    pub fn from_raw(mut values: Vec<F>) -> Self {
        let norm_sq: F = values.iter().map(|v| *v * *v).sum();
        let norm = norm_sq.sqrt();
        if norm > F::zero() {
            for v in &mut values {
                *v = *v / norm;
            }
            EmbeddingVector {
                values,
                norm: F::one(),
            }
        } else {
            EmbeddingVector {
                values,
                norm: F::zero(),
            }
        }
    }

    pub fn zeros(dim: usize) -> Self {
        EmbeddingVector {
            values: vec![F::zero(); dim],
            norm: F::zero(),
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[F] {
        &self.values
    }

    pub fn norm(&self) -> F {
        self.norm
    }

    pub fn is_zero(&self) -> bool {
        self.norm == F::zero()
    }

    /// Cosine similarity; zero vectors compare as 0 by convention.
    pub fn cosine(&self, other: &Self) -> Result<F, BackendError> {
        if self.dim() != other.dim() {
            return Err(BackendError::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        if self.is_zero() || other.is_zero() {
            return Ok(F::zero());
        }
        Ok(self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| *a * *b)
            .sum())
    }
}

/// Matrix of cosine similarities; entry (i, j) relates `a[i]` to `b[j]`.
pub fn cosine_sim_matrix<F: Real>(
    a: &[EmbeddingVector<F>],
    b: &[EmbeddingVector<F>],
) -> Result<Vec<Vec<F>>, BackendError> {
    a.iter()
        .map(|va| b.iter().map(|vb| va.cosine(vb)).collect())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NliLabel {
    Entail,
    Neutral,
    Contradict,
}

/// NLI judgment with the rule (or remote model) that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct NliVerdict<F> {
    pub label: NliLabel,
    pub score: F,
    pub rule_tag: String,
}

/// Similarity matrices of the fast channel: predicted steps against the
/// question, and all reference x predicted step pairs.
#[derive(Debug, Clone)]
pub struct SimilarityMatrices<F> {
    /// One entry per predicted step: sim(question, step_t).
    pub to_question: Vec<F>,
    /// Rows indexed by reference step, columns by predicted step.
    pub to_reference: Vec<Vec<F>>,
}

pub trait Embedder<F: Real>: Send + Sync {
    /// Stable identifier; part of every cache key.
    fn id(&self) -> &str;
    fn embed_uncached(&self, texts: &[String]) -> Result<Vec<EmbeddingVector<F>>, BackendError>;
}

pub trait NliJudge<F: Real>: Send + Sync {
    fn id(&self) -> &str;
    fn judge_uncached(
        &self,
        pairs: &[(String, String)],
    ) -> Result<Vec<NliVerdict<F>>, BackendError>;
}

/// Backend selection and tuning; lives inside the run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    /// "default", "remote", or "simulated".
    pub kind: String,
    /// Required for the remote kind.
    pub endpoint: Option<String>,
    pub timeout_ms: u64,
    /// Artificial per-call latency of the simulated kind.
    pub latency_ms: u64,
    pub dim: usize,
    pub cache_enabled: bool,
    /// Optional key-value file persisted between runs.
    pub cache_path: Option<String>,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            kind: "default".into(),
            endpoint: None,
            timeout_ms: 10_000,
            latency_ms: 2,
            dim: DEFAULT_DIM,
            cache_enabled: true,
            cache_path: None,
        }
    }
}

/// Embedder + NLI judge + shared cache, built from config.
pub struct Backend<F: Real> {
    embedder: Box<dyn Embedder<F>>,
    nli: Box<dyn NliJudge<F>>,
    cache: Cache<F>,
    expected_dim: usize,
}

impl<F: Real> Backend<F> {
    pub fn from_config(cfg: &BackendConfig) -> Result<Self, BackendError> {
        let (embedder, nli): (Box<dyn Embedder<F>>, Box<dyn NliJudge<F>>) =
            match cfg.kind.as_str() {
                "default" => (
                    Box::new(HashedBowEmbedder::new(cfg.dim)),
                    Box::new(RuleNli::new()),
                ),
                "simulated" => (
                    Box::new(SimulatedEmbedder::new(cfg.dim, cfg.latency_ms)),
                    Box::new(SimulatedNli::new(cfg.latency_ms)),
                ),
                "remote" => {
                    let endpoint = cfg.endpoint.clone().ok_or_else(|| {
                        BackendError::Config("remote backend requires backend.endpoint".into())
                    })?;
                    (
                        Box::new(RemoteEmbedder::new(&endpoint, cfg.timeout_ms, cfg.dim)),
                        Box::new(RemoteNli::new(&endpoint, cfg.timeout_ms)),
                    )
                }
                other => {
                    return Err(BackendError::Config(format!(
                        "unknown backend kind {other:?} (expected default, remote, or simulated)"
                    )))
                }
            };
        let mut cache = Cache::new(cfg.cache_enabled);
        if let Some(path) = &cfg.cache_path {
            cache.load_file(std::path::Path::new(path))?;
        }
        Ok(Backend {
            embedder,
            nli,
            cache,
            expected_dim: cfg.dim,
        })
    }

    /// Build with explicit parts (tests and custom wiring).
    pub fn from_parts(
        embedder: Box<dyn Embedder<F>>,
        nli: Box<dyn NliJudge<F>>,
        cache_enabled: bool,
        expected_dim: usize,
    ) -> Self {
        Backend {
            embedder,
            nli,
            cache: Cache::new(cache_enabled),
            expected_dim,
        }
    }

    /// Embed texts, consulting the cache per text before any compute.
    pub fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector<F>>, BackendError> {
        let out = self
            .cache
            .embed_through(self.embedder.id(), texts, |missing| {
                self.embedder.embed_uncached(missing)
            })?;
        for v in &out {
            if v.dim() != self.expected_dim {
                return Err(BackendError::DimensionMismatch {
                    expected: self.expected_dim,
                    got: v.dim(),
                });
            }
        }
        Ok(out)
    }

    pub fn embed_one(&self, text: &str) -> Result<EmbeddingVector<F>, BackendError> {
        Ok(self
            .embed_batch(std::slice::from_ref(&text.to_string()))?
            .remove(0))
    }

    pub fn nli_judge_batch(
        &self,
        pairs: &[(String, String)],
    ) -> Result<Vec<NliVerdict<F>>, BackendError> {
        self.cache
            .nli_through(self.nli.id(), pairs, |missing| {
                self.nli.judge_uncached(missing)
            })
    }

    pub fn nli_judge(&self, premise: &str, hypothesis: &str) -> Result<NliVerdict<F>, BackendError> {
        Ok(self
            .nli_judge_batch(&[(premise.to_string(), hypothesis.to_string())])?
            .remove(0))
    }

    pub fn cache_stats(&self) -> CacheStats {
        self.cache.stats()
    }

    /// Write the cache to its configured file, if any was loaded from one.
    pub fn persist_cache_to(&self, path: &std::path::Path) -> Result<(), BackendError> {
        self.cache.save_file(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type V = EmbeddingVector<f64>;

    #[test]
    fn normalization_and_zero_convention() {
        let v = V::from_raw(vec![3.0, 4.0]);
        assert!((v.norm() - 1.0).abs() < 1e-12);
        assert!((v.values()[0] - 0.6).abs() < 1e-12);
        let z = V::from_raw(vec![0.0, 0.0]);
        assert!(z.is_zero());
        assert_eq!(z.cosine(&v).unwrap(), 0.0);
    }

    #[test]
    fn self_similarity_is_one() {
        let v = V::from_raw(vec![1.0, 2.0, -3.0]);
        assert!((v.cosine(&v).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn matrix_shape_and_range() {
        let a = vec![V::from_raw(vec![1.0, 0.0]), V::from_raw(vec![0.0, 1.0])];
        let b = vec![
            V::from_raw(vec![1.0, 1.0]),
            V::from_raw(vec![-1.0, 0.0]),
            V::zeros(2),
        ];
        let m = cosine_sim_matrix(&a, &b).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m[0].len(), 3);
        for row in &m {
            for &x in row {
                assert!((-1.0 - 1e-9..=1.0 + 1e-9).contains(&x));
            }
        }
        assert_eq!(m[0][2], 0.0);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let a = V::from_raw(vec![1.0, 0.0]);
        let b = V::from_raw(vec![1.0, 0.0, 0.0]);
        assert!(a.cosine(&b).is_err());
    }
}
