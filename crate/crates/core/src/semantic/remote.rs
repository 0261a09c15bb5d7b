//! HTTP client for external embedding/NLI services.
//!
//! Wire format: POST `{endpoint}/embed` with `{"texts": [...]}` returns
//! `{"vectors": [[...], ...]}`; POST `{endpoint}/nli` with
//! `{"pairs": [[premise, hypothesis], ...]}` returns
//! `{"verdicts": [{"label": ..., "score": ...}, ...]}`. Each request is
//! retried twice before failing with the endpoint named in the error.

use std::time::Duration;

use serde::Deserialize;

use super::{BackendError, Embedder, EmbeddingVector, NliJudge, NliLabel, NliVerdict};
use crate::num::Real;

const ATTEMPTS: u32 = 3;

fn agent(timeout_ms: u64) -> ureq::Agent {
    ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_millis(timeout_ms)))
        .build()
        .into()
}

fn post_json<T: for<'de> Deserialize<'de>>(
    agent: &ureq::Agent,
    url: &str,
    body: &serde_json::Value,
) -> Result<T, BackendError> {
    let mut last_error = String::new();
    for _ in 0..ATTEMPTS {
        match agent.post(url).send_json(body) {
            Ok(mut resp) => match resp.body_mut().read_json::<T>() {
                Ok(parsed) => return Ok(parsed),
                Err(e) => return Err(BackendError::BadResponse(e.to_string())),
            },
            Err(e) => last_error = e.to_string(),
        }
    }
    Err(BackendError::Remote {
        endpoint: url.to_string(),
        attempts: ATTEMPTS,
        detail: last_error,
    })
}

#[derive(Deserialize)]
struct VectorsResponse {
    vectors: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct VerdictsResponse {
    verdicts: Vec<WireVerdict>,
}

#[derive(Deserialize)]
struct WireVerdict {
    label: String,
    score: f64,
}

pub struct RemoteEmbedder {
    url: String,
    agent: ureq::Agent,
    dim: usize,
    id: String,
}

impl RemoteEmbedder {
    pub fn new(endpoint: &str, timeout_ms: u64, dim: usize) -> Self {
        let base = endpoint.trim_end_matches('/');
        RemoteEmbedder {
            url: format!("{base}/embed"),
            agent: agent(timeout_ms),
            dim,
            id: format!("remote-embed({base})"),
        }
    }
}

impl<F: Real> Embedder<F> for RemoteEmbedder {
    fn id(&self) -> &str {
        &self.id
    }

    fn embed_uncached(&self, texts: &[String]) -> Result<Vec<EmbeddingVector<F>>, BackendError> {
        let body = serde_json::json!({ "texts": texts });
        let resp: VectorsResponse = post_json(&self.agent, &self.url, &body)?;
        if resp.vectors.len() != texts.len() {
            return Err(BackendError::BadResponse(format!(
                "{} vectors for {} texts",
                resp.vectors.len(),
                texts.len()
            )));
        }
        resp.vectors
            .into_iter()
            .map(|raw| {
                if raw.len() != self.dim {
                    return Err(BackendError::DimensionMismatch {
                        expected: self.dim,
                        got: raw.len(),
                    });
                }
                Ok(EmbeddingVector::from_raw(
                    raw.into_iter().map(F::from_config).collect(),
                ))
            })
            .collect()
    }
}

pub struct RemoteNli {
    url: String,
    agent: ureq::Agent,
    id: String,
}

impl RemoteNli {
    pub fn new(endpoint: &str, timeout_ms: u64) -> Self {
        let base = endpoint.trim_end_matches('/');
        RemoteNli {
            url: format!("{base}/nli"),
            agent: agent(timeout_ms),
            id: format!("remote-nli({base})"),
        }
    }
}

fn parse_label(s: &str) -> Result<NliLabel, BackendError> {
    match s {
        "entail" | "entailment" => Ok(NliLabel::Entail),
        "neutral" => Ok(NliLabel::Neutral),
        "contradict" | "contradiction" => Ok(NliLabel::Contradict),
        other => Err(BackendError::BadResponse(format!(
            "unknown NLI label {other:?}"
        ))),
    }
}

impl<F: Real> NliJudge<F> for RemoteNli {
    fn id(&self) -> &str {
        &self.id
    }

    fn judge_uncached(
        &self,
        pairs: &[(String, String)],
    ) -> Result<Vec<NliVerdict<F>>, BackendError> {
        let wire: Vec<[&str; 2]> = pairs
            .iter()
            .map(|(p, h)| [p.as_str(), h.as_str()])
            .collect();
        let body = serde_json::json!({ "pairs": wire });
        let resp: VerdictsResponse = post_json(&self.agent, &self.url, &body)?;
        if resp.verdicts.len() != pairs.len() {
            return Err(BackendError::BadResponse(format!(
                "{} verdicts for {} pairs",
                resp.verdicts.len(),
                pairs.len()
            )));
        }
        resp.verdicts
            .into_iter()
            .map(|v| {
                if !(0.0..=1.0).contains(&v.score) {
                    return Err(BackendError::BadResponse(format!(
                        "NLI score {} outside [0, 1]",
                        v.score
                    )));
                }
                Ok(NliVerdict {
                    label: parse_label(&v.label)?,
                    score: F::from_config(v.score),
                    rule_tag: "remote".into(),
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;

    /// One-shot HTTP server returning a canned JSON body.
    fn serve_once(body: &'static str) -> String {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind");
        let addr = listener.local_addr().expect("addr");
        std::thread::spawn(move || {
            let (stream, _) = listener.accept().expect("accept");
            let mut reader = BufReader::new(stream);
            let mut content_length = 0usize;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).expect("read header");
                if let Some(v) = line.to_lowercase().strip_prefix("content-length:") {
                    content_length = v.trim().parse().unwrap_or(0);
                }
                if line == "\r\n" || line.is_empty() {
                    break;
                }
            }
            let mut payload = vec![0u8; content_length];
            reader.read_exact(&mut payload).expect("read body");
            let response = format!(
                "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\n\r\n{}",
                body.len(),
                body
            );
            reader
                .into_inner()
                .write_all(response.as_bytes())
                .expect("write response");
        });
        format!("http://{addr}")
    }

    #[test]
    fn embeds_via_wire_format() {
        let endpoint = serve_once(r#"{"vectors": [[1.0, 0.0], [0.0, 2.0]]}"#);
        let e = RemoteEmbedder::new(&endpoint, 2000, 2);
        let texts = vec!["a".to_string(), "b".to_string()];
        let vs: Vec<EmbeddingVector<f64>> = e.embed_uncached(&texts).unwrap();
        assert_eq!(vs.len(), 2);
        assert!((vs[0].values()[0] - 1.0).abs() < 1e-12);
        assert!((vs[1].values()[1] - 1.0).abs() < 1e-12, "normalized");
    }

    #[test]
    fn judges_via_wire_format() {
        let endpoint = serve_once(r#"{"verdicts": [{"label": "contradiction", "score": 0.93}]}"#);
        let n = RemoteNli::new(&endpoint, 2000);
        let pairs = vec![("p".to_string(), "h".to_string())];
        let vs: Vec<NliVerdict<f64>> = n.judge_uncached(&pairs).unwrap();
        assert_eq!(vs[0].label, NliLabel::Contradict);
        assert!((vs[0].score - 0.93).abs() < 1e-12);
        assert_eq!(vs[0].rule_tag, "remote");
    }

    #[test]
    fn dimension_mismatch_is_hard_error() {
        let endpoint = serve_once(r#"{"vectors": [[1.0, 0.0, 0.0]]}"#);
        let e = RemoteEmbedder::new(&endpoint, 2000, 2);
        let texts = vec!["a".to_string()];
        let err = Embedder::<f64>::embed_uncached(&e, &texts).unwrap_err();
        assert!(matches!(err, BackendError::DimensionMismatch { expected: 2, got: 3 }));
    }

    #[test]
    fn dead_endpoint_fails_after_retries_naming_it() {
        // bind then drop to get a port that refuses connections
        let port = {
            let l = TcpListener::bind("127.0.0.1:0").unwrap();
            l.local_addr().unwrap().port()
        };
        let endpoint = format!("http://127.0.0.1:{port}");
        let e = RemoteEmbedder::new(&endpoint, 300, 2);
        let texts = vec!["a".to_string()];
        let err = Embedder::<f64>::embed_uncached(&e, &texts).unwrap_err();
        match err {
            BackendError::Remote {
                endpoint: named,
                attempts,
                ..
            } => {
                assert!(named.contains(&port.to_string()));
                assert_eq!(attempts, 3);
            }
            other => panic!("expected remote error, got {other:?}"),
        }
    }
}
