//! Answer-generator clients: a deterministic mock for offline tests and a
//! remote chat-completion client.

use std::time::Duration;

use base64::Engine;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::PromptBundle;
use crate::decompose::UnitKind;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("authentication rejected by generation endpoint (status {status})")]
    Auth { status: u16 },
    #[error("generation refused by content policy: {message}")]
    Refused { message: String },
    #[error("generation request failed after {attempts} attempt(s): {message} (retryable: {retryable})")]
    Transport {
        message: String,
        retryable: bool,
        attempts: u32,
    },
    #[error("malformed generation response: {0}")]
    BadResponse(String),
    #[error("invalid generator spec: {0}")]
    BadSpec(String),
}

pub trait AnswerClient: Send + Sync {
    fn name(&self) -> &str;

    /// Produce the raw model reply for a composed prompt.
    fn complete(&self, bundle: &PromptBundle) -> Result<String, ClientError>;

    /// True when identical bundles always produce identical replies; the
    /// evaluation harness flags such runs and suppresses wall-clock noise.
    fn is_deterministic(&self) -> bool {
        false
    }
}

/// Deterministic offline stand-in for a reasoning model.
///
/// Echoes the first cell reference of the top-ranked non-image chunk; when
/// the top-ranked chunk is an image, echoes its caption. Replies are valid
/// JSON, so the full parse path is exercised.
#[derive(Debug, Default, Clone, Copy)]
pub struct MockAnswerClient;

impl AnswerClient for MockAnswerClient {
    fn name(&self) -> &str {
        "mock"
    }

    fn complete(&self, bundle: &PromptBundle) -> Result<String, ClientError> {
        let manifest = &bundle.chunk_manifest;
        let (reasoning, answer) = match manifest.first() {
            None => (
                "no chunks were retrieved for this question".to_string(),
                "NO_CHUNKS".to_string(),
            ),
            Some(top) if top.kind == UnitKind::Image => (
                format!("echoing the caption of top-ranked image chunk {}", top.unit_id),
                top.caption.clone().unwrap_or_else(|| top.unit_id.clone()),
            ),
            Some(_) => {
                let chunk = manifest
                    .iter()
                    .find(|c| c.kind != UnitKind::Image)
                    .expect("top chunk is non-image");
                (
                    format!(
                        "echoing the first cell reference of top-ranked chunk {}",
                        chunk.unit_id
                    ),
                    chunk
                        .anchor
                        .clone()
                        .unwrap_or_else(|| chunk.unit_id.clone()),
                )
            }
        };
        Ok(serde_json::json!({ "reasoning": reasoning, "answer": answer }).to_string())
    }

    fn is_deterministic(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GenRemoteConfig {
    pub endpoint: String,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: String,
    pub timeout_ms: u64,
    pub max_retries: u32,
    pub backoff_ms: u64,
}

impl Default for GenRemoteConfig {
    fn default() -> Self {
        Self {
            endpoint: String::new(),
            api_key_env: "FRTR_GEN_API_KEY".into(),
            timeout_ms: 60_000,
            max_retries: 2,
            backoff_ms: 500,
        }
    }
}

/// Remote chat-completion client with image-attachment support.
///
/// Request: `{"prompt": <text>, "attachments": [{"media_type", "data"
/// (base64), "unit_id"}]}`. Response: `{"text": <raw model reply>}`, or
/// `{"error": <message>, "refusal": true}` for content-policy refusals.
pub struct RemoteAnswerClient {
    cfg: GenRemoteConfig,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl RemoteAnswerClient {
    pub fn new(cfg: GenRemoteConfig) -> Result<Self, ClientError> {
        if cfg.endpoint.is_empty() {
            return Err(ClientError::BadSpec(
                "remote generator needs an endpoint".into(),
            ));
        }
        let api_key = std::env::var(&cfg.api_key_env).ok().filter(|k| !k.is_empty());
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(cfg.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            cfg,
            api_key,
            agent,
        })
    }
}

impl AnswerClient for RemoteAnswerClient {
    fn name(&self) -> &str {
        "remote"
    }

    fn complete(&self, bundle: &PromptBundle) -> Result<String, ClientError> {
        let attachments: Vec<serde_json::Value> = bundle
            .attachments
            .iter()
            .map(|a| {
                serde_json::json!({
                    "media_type": a.media_type,
                    "data": base64::engine::general_purpose::STANDARD.encode(&a.bytes),
                    "unit_id": a.unit_id,
                })
            })
            .collect();
        let body = serde_json::json!({
            "prompt": bundle.text,
            "attachments": attachments,
        });

        let attempts = self.cfg.max_retries + 1;
        let mut last: Option<ClientError> = None;
        for attempt in 0..attempts {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(self.cfg.backoff_ms << (attempt - 1)));
            }
            let mut req = self.agent.post(&self.cfg.endpoint);
            if let Some(key) = &self.api_key {
                req = req.header("authorization", &format!("Bearer {key}"));
            }
            match req.send_json(&body) {
                Ok(mut resp) => {
                    let status = resp.status().as_u16();
                    if status == 401 || status == 403 {
                        return Err(ClientError::Auth { status });
                    }
                    let parsed: serde_json::Value = match resp.body_mut().read_json() {
                        Ok(v) => v,
                        Err(e) if (200..300).contains(&status) => {
                            return Err(ClientError::BadResponse(format!(
                                "invalid JSON body: {e}"
                            )))
                        }
                        Err(_) => serde_json::Value::Null,
                    };
                    if parsed
                        .get("refusal")
                        .and_then(serde_json::Value::as_bool)
                        .unwrap_or(false)
                    {
                        return Err(ClientError::Refused {
                            message: parsed
                                .get("error")
                                .and_then(serde_json::Value::as_str)
                                .unwrap_or("(no message)")
                                .to_string(),
                        });
                    }
                    if status == 429 || status >= 500 {
                        last = Some(ClientError::Transport {
                            message: format!("endpoint returned status {status}"),
                            retryable: true,
                            attempts: attempt + 1,
                        });
                        continue;
                    }
                    if !(200..300).contains(&status) {
                        return Err(ClientError::Transport {
                            message: format!("endpoint returned status {status}"),
                            retryable: false,
                            attempts: attempt + 1,
                        });
                    }
                    return match parsed.get("text").and_then(serde_json::Value::as_str) {
                        Some(text) => Ok(text.to_string()),
                        None => Err(ClientError::BadResponse(
                            "response lacks a \"text\" field".into(),
                        )),
                    };
                }
                Err(e) => {
                    last = Some(ClientError::Transport {
                        message: e.to_string(),
                        retryable: true,
                        attempts: attempt + 1,
                    });
                }
            }
        }
        Err(last.expect("at least one attempt"))
    }
}

/// Which answer generator to construct.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GeneratorSpec {
    #[default]
    Mock,
    Remote(GenRemoteConfig),
}

pub fn build_client(spec: &GeneratorSpec) -> Result<Box<dyn AnswerClient>, ClientError> {
    match spec {
        GeneratorSpec::Mock => Ok(Box::new(MockAnswerClient)),
        GeneratorSpec::Remote(cfg) => Ok(Box::new(RemoteAnswerClient::new(cfg.clone())?)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::FusionSource;
    use crate::reason::ChunkMeta;

    fn bundle_with(manifest: Vec<ChunkMeta>) -> PromptBundle {
        PromptBundle {
            text: "prompt".into(),
            attachments: Vec::new(),
            token_estimate: 2,
            chunk_manifest: manifest,
        }
    }

    fn meta(unit_id: &str, kind: UnitKind, anchor: Option<&str>, caption: Option<&str>) -> ChunkMeta {
        ChunkMeta {
            unit_id: unit_id.into(),
            rrf_score: 1.0 / 61.0,
            source: FusionSource::Vector,
            kind,
            sheet: "S".into(),
            anchor: anchor.map(str::to_string),
            caption: caption.map(str::to_string),
        }
    }

    #[test]
    fn mock_echoes_first_cell_of_top_chunk() {
        let client = MockAnswerClient;
        let bundle = bundle_with(vec![
            meta("S/row:5", UnitKind::Row, Some("S!A5"), None),
            meta("S/row:9", UnitKind::Row, Some("S!A9"), None),
        ]);
        let raw = client.complete(&bundle).unwrap();
        let (reasoning, answer) = crate::reason::parse_answer(&raw).unwrap();
        assert_eq!(answer, "S!A5");
        assert!(reasoning.contains("S/row:5"));
    }

    #[test]
    fn mock_echoes_caption_for_top_image() {
        let client = MockAnswerClient;
        let bundle = bundle_with(vec![
            meta("S/img:c1", UnitKind::Image, None, Some("monthly trend increasing")),
            meta("S/row:5", UnitKind::Row, Some("S!A5"), None),
        ]);
        let raw = client.complete(&bundle).unwrap();
        let (_, answer) = crate::reason::parse_answer(&raw).unwrap();
        assert_eq!(answer, "monthly trend increasing");
    }

    #[test]
    fn mock_handles_empty_manifest() {
        let client = MockAnswerClient;
        let raw = client.complete(&bundle_with(Vec::new())).unwrap();
        let (_, answer) = crate::reason::parse_answer(&raw).unwrap();
        assert_eq!(answer, "NO_CHUNKS");
    }

    #[test]
    fn mock_is_deterministic() {
        let client = MockAnswerClient;
        let bundle = bundle_with(vec![meta("S/row:5", UnitKind::Row, Some("S!A5"), None)]);
        assert!(client.is_deterministic());
        assert_eq!(
            client.complete(&bundle).unwrap(),
            client.complete(&bundle).unwrap()
        );
    }

    #[test]
    fn remote_spec_requires_endpoint() {
        assert!(RemoteAnswerClient::new(GenRemoteConfig::default()).is_err());
    }
}
