//! Shared call cache for embedding and NLI backends.
//!
//! Keys are (backend id, exact text bytes); values are returned verbatim,
//! so a cached run is element-wise identical to an uncached one. The maps
//! behave as linearizable get-or-compute: concurrent misses may duplicate
//! work but the deterministic backends make every insert agree.

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{BackendError, EmbeddingVector, NliLabel, NliVerdict};
use crate::num::Real;

/// Monotone counters since process start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
    pub entries: u64,
}

pub struct Cache<F> {
    enabled: bool,
    embed: Mutex<HashMap<(String, String), EmbeddingVector<F>>>,
    nli: Mutex<HashMap<(String, String, String), NliVerdict<F>>>,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl<F: Real> Cache<F> {
    pub fn new(enabled: bool) -> Self {
        Cache {
            enabled,
            embed: Mutex::new(HashMap::new()),
            nli: Mutex::new(HashMap::new()),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        }
    }

    pub fn stats(&self) -> CacheStats {
        let entries = self.embed.lock().expect("cache lock").len() as u64
            + self.nli.lock().expect("cache lock").len() as u64;
        CacheStats {
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
            entries,
        }
    }

    /// Serve a batch through the cache. Each unique text counts one hit or
    /// one miss; repeated texts within a batch are computed once.
    pub(crate) fn embed_through<C>(
        &self,
        backend_id: &str,
        texts: &[String],
        compute: C,
    ) -> Result<Vec<EmbeddingVector<F>>, BackendError>
    where
        C: FnOnce(&[String]) -> Result<Vec<EmbeddingVector<F>>, BackendError>,
    {
        if !self.enabled {
            self.misses.fetch_add(texts.len() as u64, Ordering::Relaxed);
            let out = compute(texts)?;
            if out.len() != texts.len() {
                return Err(BackendError::BadResponse(format!(
                    "embedder returned {} vectors for {} texts",
                    out.len(),
                    texts.len()
                )));
            }
            return Ok(out);
        }

        let mut missing: Vec<String> = Vec::new();
        {
            let map = self.embed.lock().expect("cache lock");
            let mut seen: HashMap<&str, bool> = HashMap::new();
            for text in texts {
                if seen.contains_key(text.as_str()) {
                    continue;
                }
                let cached = map.contains_key(&(backend_id.to_string(), text.clone()));
                seen.insert(text, cached);
                if cached {
                    self.hits.fetch_add(1, Ordering::Relaxed);
                } else {
                    self.misses.fetch_add(1, Ordering::Relaxed);
                    missing.push(text.clone());
                }
            }
        }

        if !missing.is_empty() {
            let computed = compute(&missing)?;
            if computed.len() != missing.len() {
                return Err(BackendError::BadResponse(format!(
                    "embedder returned {} vectors for {} texts",
                    computed.len(),
                    missing.len()
                )));
            }
            let mut map = self.embed.lock().expect("cache lock");
            for (text, vec) in missing.into_iter().zip(computed) {
                map.insert((backend_id.to_string(), text), vec);
            }
        }

        let map = self.embed.lock().expect("cache lock");
        texts
            .iter()
            .map(|text| {
                map.get(&(backend_id.to_string(), text.clone()))
                    .cloned()
                    .ok_or_else(|| BackendError::BadResponse("cache lost an entry".into()))
            })
            .collect()
    }

    pub(crate) fn nli_through<C>(
        &self,
        backend_id: &str,
        pairs: &[(String, String)],
        compute: C,
    ) -> Result<Vec<NliVerdict<F>>, BackendError>
    where
        C: FnOnce(&[(String, String)]) -> Result<Vec<NliVerdict<F>>, BackendError>,
    {
        if !self.enabled {
            self.misses.fetch_add(pairs.len() as u64, Ordering::Relaxed);
            let out = compute(pairs)?;
            if out.len() != pairs.len() {
                return Err(BackendError::BadResponse(format!(
                    "NLI judge returned {} verdicts for {} pairs",
                    out.len(),
                    pairs.len()
                )));
            }
            return Ok(out);
        }

        let mut missing: Vec<(String, String)> = Vec::new();
        {
            let map = self.nli.lock().expect("cache lock");
            let mut seen: HashMap<(&str, &str), bool> = HashMap::new();
            for (p, h) in pairs {
                if seen.contains_key(&(p.as_str(), h.as_str())) {
                    continue;
                }
                let cached =
                    map.contains_key(&(backend_id.to_string(), p.clone(), h.clone()));
                seen.insert((p, h), cached);
                if cached {
                    self.hits.fetch_add(1, Ordering::Relaxed);
                } else {
                    self.misses.fetch_add(1, Ordering::Relaxed);
                    missing.push((p.clone(), h.clone()));
                }
            }
        }

        if !missing.is_empty() {
            let computed = compute(&missing)?;
            if computed.len() != missing.len() {
                return Err(BackendError::BadResponse(format!(
                    "NLI judge returned {} verdicts for {} pairs",
                    computed.len(),
                    missing.len()
                )));
            }
            let mut map = self.nli.lock().expect("cache lock");
            for ((p, h), verdict) in missing.into_iter().zip(computed) {
                map.insert((backend_id.to_string(), p, h), verdict);
            }
        }

        let map = self.nli.lock().expect("cache lock");
        pairs
            .iter()
            .map(|(p, h)| {
                map.get(&(backend_id.to_string(), p.clone(), h.clone()))
                    .cloned()
                    .ok_or_else(|| BackendError::BadResponse("cache lost an entry".into()))
            })
            .collect()
    }

    pub(crate) fn load_file(&mut self, path: &Path) -> Result<(), BackendError> {
        if !path.exists() {
            return Ok(());
        }
        let data = std::fs::read_to_string(path)
            .map_err(|e| BackendError::CacheFile(format!("{}: {e}", path.display())))?;
        let file: CacheFile = serde_json::from_str(&data)
            .map_err(|e| BackendError::CacheFile(format!("{}: {e}", path.display())))?;
        let mut embed = self.embed.lock().expect("cache lock");
        for entry in file.embeddings {
            let values: Vec<F> = entry
                .values
                .into_iter()
                .map(|v| F::from_config(v))
                .collect();
            embed.insert(
                (entry.backend, entry.text),
                EmbeddingVector::from_raw(values),
            );
        }
        let mut nli = self.nli.lock().expect("cache lock");
        for entry in file.nli {
            nli.insert(
                (entry.backend, entry.premise, entry.hypothesis),
                NliVerdict {
                    label: entry.label,
                    score: F::from_config(entry.score),
                    rule_tag: entry.rule_tag,
                },
            );
        }
        Ok(())
    }

    pub(crate) fn save_file(&self, path: &Path) -> Result<(), BackendError> {
        let embed = self.embed.lock().expect("cache lock");
        let mut embeddings: Vec<EmbedEntry> = embed
            .iter()
            .map(|((backend, text), vec)| EmbedEntry {
                backend: backend.clone(),
                text: text.clone(),
                values: vec
                    .values()
                    .iter()
                    .map(|v| v.to_f64().unwrap_or(0.0))
                    .collect(),
            })
            .collect();
        embeddings.sort_by(|a, b| (&a.backend, &a.text).cmp(&(&b.backend, &b.text)));

        let nli_map = self.nli.lock().expect("cache lock");
        let mut nli: Vec<NliEntry> = nli_map
            .iter()
            .map(|((backend, p, h), v)| NliEntry {
                backend: backend.clone(),
                premise: p.clone(),
                hypothesis: h.clone(),
                label: v.label,
                score: v.score.to_f64().unwrap_or(0.0),
                rule_tag: v.rule_tag.clone(),
            })
            .collect();
        nli.sort_by(|a, b| {
            (&a.backend, &a.premise, &a.hypothesis).cmp(&(&b.backend, &b.premise, &b.hypothesis))
        });

        let file = CacheFile { embeddings, nli };
        let body = serde_json::to_string(&file)
            .map_err(|e| BackendError::CacheFile(e.to_string()))?;
        std::fs::write(path, body)
            .map_err(|e| BackendError::CacheFile(format!("{}: {e}", path.display())))?;
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct CacheFile {
    embeddings: Vec<EmbedEntry>,
    nli: Vec<NliEntry>,
}

#[derive(Serialize, Deserialize)]
struct EmbedEntry {
    backend: String,
    text: String,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct NliEntry {
    backend: String,
    premise: String,
    hypothesis: String,
    label: NliLabel,
    score: f64,
    rule_tag: String,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semantic::{Backend, HashedBowEmbedder, RuleNli};

    fn backend(enabled: bool) -> Backend<f64> {
        Backend::from_parts(
            Box::new(HashedBowEmbedder::new(256)),
            Box::new(RuleNli::new()),
            enabled,
            256,
        )
    }

    #[test]
    fn fresh_cache_is_empty() {
        let b = backend(true);
        assert_eq!(
            b.cache_stats(),
            CacheStats {
                hits: 0,
                misses: 0,
                entries: 0
            }
        );
    }

    #[test]
    fn second_lookup_hits() {
        let b = backend(true);
        b.embed_one("x").unwrap();
        let after_first = b.cache_stats();
        assert_eq!(after_first.misses, 1);
        b.embed_one("x").unwrap();
        let after_second = b.cache_stats();
        assert!(after_second.hits >= 1);
        assert_eq!(after_second.misses, 1);
    }

    #[test]
    fn cached_results_equal_uncached() {
        let with = backend(true);
        let without = backend(false);
        let texts: Vec<String> = ["a b c", "a b c", "d e"].iter().map(|s| s.to_string()).collect();
        let w1 = with.embed_batch(&texts).unwrap();
        let w2 = with.embed_batch(&texts).unwrap();
        let u = without.embed_batch(&texts).unwrap();
        for i in 0..texts.len() {
            assert_eq!(w1[i].values(), u[i].values());
            assert_eq!(w2[i].values(), u[i].values());
        }
    }

    #[test]
    fn round_trips_through_file() {
        let b = backend(true);
        b.embed_one("persist me").unwrap();
        b.nli_judge("x = 1", "x = 2").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.json");
        b.persist_cache_to(&path).unwrap();

        let cfg = crate::semantic::BackendConfig {
            cache_path: Some(path.display().to_string()),
            ..Default::default()
        };
        let reloaded: Backend<f64> = Backend::from_config(&cfg).unwrap();
        assert_eq!(reloaded.cache_stats().entries, 2);
        reloaded.embed_one("persist me").unwrap();
        assert_eq!(reloaded.cache_stats().hits, 1);
        assert_eq!(reloaded.cache_stats().misses, 0);
    }
}
