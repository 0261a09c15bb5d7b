//! Latency-simulating backends for cache benchmarking.
//!
//! Wrap the deterministic default backends and sleep a configured amount
//! per call, approximating the cost profile of a remote model service
//! without any network dependency.

use std::time::Duration;

use super::{BackendError, Embedder, EmbeddingVector, HashedBowEmbedder, NliJudge, NliVerdict, RuleNli};
use crate::num::Real;

pub struct SimulatedEmbedder {
    inner: HashedBowEmbedder,
    latency: Duration,
    id: String,
}

impl SimulatedEmbedder {
    pub fn new(dim: usize, latency_ms: u64) -> Self {
        SimulatedEmbedder {
            inner: HashedBowEmbedder::new(dim),
            latency: Duration::from_millis(latency_ms),
            id: format!("simulated-embed-{dim}"),
        }
    }
}

impl<F: Real> Embedder<F> for SimulatedEmbedder {
    fn id(&self) -> &str {
        &self.id
    }

    fn embed_uncached(&self, texts: &[String]) -> Result<Vec<EmbeddingVector<F>>, BackendError> {
        std::thread::sleep(self.latency);
        self.inner.embed_uncached(texts)
    }
}

pub struct SimulatedNli {
    inner: RuleNli,
    latency: Duration,
    id: String,
}

impl SimulatedNli {
    pub fn new(latency_ms: u64) -> Self {
        SimulatedNli {
            inner: RuleNli::new(),
            latency: Duration::from_millis(latency_ms),
            id: "simulated-nli".into(),
        }
    }
}

impl<F: Real> NliJudge<F> for SimulatedNli {
    fn id(&self) -> &str {
        &self.id
    }

    fn judge_uncached(
        &self,
        pairs: &[(String, String)],
    ) -> Result<Vec<NliVerdict<F>>, BackendError> {
        std::thread::sleep(self.latency);
        self.inner.judge_uncached(pairs)
    }
}
