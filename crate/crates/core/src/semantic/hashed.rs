//! Deterministic default backends: signed hashed bag-of-words embeddings
//! and rule-based NLI.

use once_cell::sync::Lazy;
use regex::Regex;

use super::{BackendError, Embedder, EmbeddingVector, NliJudge, NliLabel, NliVerdict};
use crate::num::Real;
use crate::parsing::parse_numeric_literal;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub(crate) fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = FNV_OFFSET;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Token bucket and sign under the hashed bag-of-words scheme; exposed so
/// tests can build collision-free fixtures.
pub fn token_bucket(token: &str, dim: usize) -> (usize, i64) {
    let h = fnv1a64(token.as_bytes());
    let bucket = (h % dim as u64) as usize;
    let sign = if (h >> 8) & 1 == 1 { 1 } else { -1 };
    (bucket, sign)
}

/// Signed hashed bag-of-words embedder: 64-bit FNV-1a per token, bucket by
/// hash mod dim, sign from hash bit 8, signed counts L2-normalized.
/// Bit-deterministic across runs and platforms.
pub struct HashedBowEmbedder {
    dim: usize,
    id: String,
}

impl HashedBowEmbedder {
    pub fn new(dim: usize) -> Self {
        HashedBowEmbedder {
            dim,
            id: format!("hashed-bow-{dim}"),
        }
    }
}

impl<F: Real> Embedder<F> for HashedBowEmbedder {
    fn id(&self) -> &str {
        &self.id
    }

    fn embed_uncached(&self, texts: &[String]) -> Result<Vec<EmbeddingVector<F>>, BackendError> {
        Ok(texts
            .iter()
            .map(|text| {
                let mut acc = vec![0i64; self.dim];
                for tok in tokenize(text) {
                    let (bucket, sign) = token_bucket(&tok, self.dim);
                    acc[bucket] += sign;
                }
                let raw: Vec<F> = acc
                    .into_iter()
                    .map(|v| F::from_i64(v).expect("small count fits"))
                    .collect();
                EmbeddingVector::from_raw(raw)
            })
            .collect())
    }
}

static SYM_BINDING: Lazy<Regex> = Lazy::new(|| {
    Regex::new(r"([a-z_][a-z0-9_]*)\s*[=:]\s*([-+]?\d+(?:\.\d+)?(?:/\d+)?)").expect("static regex")
});
static IS_BINDING: Lazy<Regex> = Lazy::new(|| {
    Regex::new(r"\b([a-z_][a-z0-9_]*)\s+is\s+([-+]?\d+(?:\.\d+)?(?:/\d+)?)").expect("static regex")
});

fn bindings(text: &str) -> Vec<(String, num_rational::BigRational)> {
    let lower = text.to_lowercase();
    let mut out = Vec::new();
    for re in [&*SYM_BINDING, &*IS_BINDING] {
        for cap in re.captures_iter(&lower) {
            if let Some(v) = parse_numeric_literal(&cap[2]) {
                out.push((cap[1].to_string(), v));
            }
        }
    }
    out
}

fn negation_tokens(text: &str) -> Vec<String> {
    tokenize(&text.to_lowercase().replace("n't", " not"))
}

/// True when removing exactly one "not" from `a` yields `b`.
fn differs_by_removed_not(a: &[String], b: &[String]) -> bool {
    if a.len() != b.len() + 1 {
        return false;
    }
    for (i, tok) in a.iter().enumerate() {
        if tok == "not" {
            let mut shorter: Vec<&String> = a.iter().collect();
            shorter.remove(i);
            if shorter.iter().zip(b.iter()).all(|(x, y)| *x == y) {
                return true;
            }
        }
    }
    false
}

/// Rule-based NLI:
/// 1. the same identifier bound to different numeric values across the
///    pair (`x = 5`, `x is 5`, `x: 5` forms) contradicts;
/// 2. the hypothesis equal to the premise with one "not"/"n't" inserted or
///    removed contradicts;
/// 3. a normalized-substring hypothesis is entailed;
/// otherwise neutral at score 0.5.
pub struct RuleNli {
    id: String,
}

impl RuleNli {
    pub fn new() -> Self {
        RuleNli {
            id: "rule-nli".into(),
        }
    }

    fn judge_one<F: Real>(premise: &str, hypothesis: &str) -> NliVerdict<F> {
        let pb = bindings(premise);
        let hb = bindings(hypothesis);
        for (pi, pv) in &pb {
            for (hi, hv) in &hb {
                if pi == hi && pv != hv {
                    return NliVerdict {
                        label: NliLabel::Contradict,
                        score: F::one(),
                        rule_tag: "binding_conflict".into(),
                    };
                }
            }
        }

        let pt = negation_tokens(premise);
        let ht = negation_tokens(hypothesis);
        if differs_by_removed_not(&pt, &ht) || differs_by_removed_not(&ht, &pt) {
            return NliVerdict {
                label: NliLabel::Contradict,
                score: F::one(),
                rule_tag: "negation_flip".into(),
            };
        }

        let pjoined = pt.join(" ");
        let hjoined = ht.join(" ");
        if !hjoined.is_empty() && pjoined.contains(&hjoined) {
            return NliVerdict {
                label: NliLabel::Entail,
                score: F::one(),
                rule_tag: "substring_entailment".into(),
            };
        }

        NliVerdict {
            label: NliLabel::Neutral,
            score: F::from_config(0.5),
            rule_tag: "no_rule".into(),
        }
    }
}

impl Default for RuleNli {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Real> NliJudge<F> for RuleNli {
    fn id(&self) -> &str {
        &self.id
    }

    fn judge_uncached(
        &self,
        pairs: &[(String, String)],
    ) -> Result<Vec<NliVerdict<F>>, BackendError> {
        Ok(pairs
            .iter()
            .map(|(p, h)| Self::judge_one(p, h))
            .collect())
    }
}
