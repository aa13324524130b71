//! Embedders: a deterministic signed-feature-hashing reference embedder and
//! a remote HTTP client, both behind one trait so downstream code never
//! branches on which is in use.
//!
//! Every embedder emits unit-norm vectors and text/image outputs share one
//! dimension, so cosine similarity reduces to a dot product everywhere
//! downstream. Vectors are re-normalized at this boundary even when a remote
//! service already claims to normalize.
//!
//! The reference embedder is signed feature hashing over the shared
//! tokenizer: deterministic, dependency-free, and order-preserving on token
//! overlap. It is a retrieval-testing stand-in, not a claim about semantic
//! quality.

use std::collections::HashMap;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use base64::Engine;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::decompose::{Unit, UnitKind};
use crate::text::tokenize;
use crate::workbook::ImageAsset;

pub const DEFAULT_DIM: usize = 256;
pub const MIN_DIM: usize = 8;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("text {0:?} yields no tokens")]
    NoTokens(String),
    #[error("embedding has zero norm")]
    ZeroNorm,
    #[error("embedding dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("unsupported media type {0:?}")]
    UnsupportedMediaType(String),
    #[error("image unit references unknown asset {0:?}")]
    MissingImage(String),
    #[error("invalid embedder spec: {0}")]
    BadSpec(String),
    #[error("authentication rejected by embedding endpoint (status {status})")]
    Auth { status: u16 },
    #[error("embedding request failed after {attempts} attempt(s): {message} (retryable: {retryable})")]
    Transport {
        message: String,
        retryable: bool,
        attempts: u32,
    },
    #[error("malformed embedding response: {0}")]
    BadResponse(String),
}

/// A unit-norm vector. Constructing one normalizes and validates the input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding(Vec<f32>);

impl Embedding {
    /// Normalize `values` to unit L2 norm. Errors on zero or non-finite
    /// norms.
    pub fn unit(mut values: Vec<f32>) -> Result<Self, EmbedError> {
        let norm_sq: f64 = values.iter().map(|&v| f64::from(v) * f64::from(v)).sum();
        if !(norm_sq.is_finite() && norm_sq > 0.0) {
            return Err(EmbedError::ZeroNorm);
        }
        let inv = 1.0 / norm_sq.sqrt();
        for v in &mut values {
            *v = (f64::from(*v) * inv) as f32;
        }
        Ok(Self(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f32] {
        &self.0
    }

    /// Dot product, accumulated in f64; equal to cosine similarity by the
    /// unit-norm invariant.
    pub fn dot(&self, other: &Embedding) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(&a, &b)| f64::from(a) * f64::from(b))
            .sum()
    }
}

pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;

    /// Embed text; `text` must be non-empty after whitespace trimming.
    fn embed_text(&self, text: &str) -> Result<Embedding, EmbedError>;

    /// Embed an image asset into the same space as text.
    fn embed_image(&self, asset: &ImageAsset, caption: Option<&str>)
        -> Result<Embedding, EmbedError>;
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(PRIME);
    }
    h
}

/// Deterministic reference embedder: tokenize, hash each token into `dim`
/// signed buckets, accumulate, L2-normalize.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dim: usize,
}

impl HashEmbedder {
    pub fn new(dim: usize) -> Result<Self, EmbedError> {
        if dim < MIN_DIM {
            return Err(EmbedError::BadSpec(format!(
                "dim must be >= {MIN_DIM}, got {dim}"
            )));
        }
        Ok(Self { dim })
    }
}

impl Default for HashEmbedder {
    fn default() -> Self {
        Self { dim: DEFAULT_DIM }
    }
}

impl Embedder for HashEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_text(&self, text: &str) -> Result<Embedding, EmbedError> {
        if text.trim().is_empty() {
            return Err(EmbedError::EmptyText);
        }
        let tokens = tokenize(text);
        if tokens.is_empty() {
            return Err(EmbedError::NoTokens(text.to_string()));
        }
        let mut acc = vec![0.0f32; self.dim];
        for token in &tokens {
            let h = fnv1a64(token.as_bytes());
            let bucket = (h % self.dim as u64) as usize;
            let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
            acc[bucket] += sign;
        }
        // Signed sums can cancel to an exact zero vector (tokens pairing up
        // in shared buckets with opposite signs). Keep the embedding
        // defined and deterministic by falling back to one whole-text
        // bucket.
        if acc.iter().all(|&v| v == 0.0) {
            let h = fnv1a64(text.as_bytes());
            acc[(h % self.dim as u64) as usize] = 1.0;
        }
        Embedding::unit(acc)
    }

    fn embed_image(
        &self,
        asset: &ImageAsset,
        caption: Option<&str>,
    ) -> Result<Embedding, EmbedError> {
        if asset.bytes.is_empty() {
            return Err(EmbedError::BadResponse("image asset has no bytes".into()));
        }
        let digest = hex::encode(Sha256::digest(&asset.bytes));
        let mut text = String::new();
        if let Some(c) = caption {
            text.push_str(c);
            text.push(' ');
        }
        text.push_str(&asset.media_type);
        text.push(' ');
        text.push_str(&digest);
        self.embed_text(&text)
    }
}

/// Bounds concurrent in-flight remote requests.
struct Gate {
    max: usize,
    active: Mutex<usize>,
    cv: Condvar,
}

impl Gate {
    fn new(max: usize) -> Self {
        Self {
            max: max.max(1),
            active: Mutex::new(0),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> GateGuard<'_> {
        let mut active = self.active.lock().expect("gate poisoned");
        while *active >= self.max {
            active = self.cv.wait(active).expect("gate poisoned");
        }
        *active += 1;
        GateGuard { gate: self }
    }
}

struct GateGuard<'a> {
    gate: &'a Gate,
}

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        let mut active = self.gate.active.lock().expect("gate poisoned");
        *active -= 1;
        self.gate.cv.notify_one();
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub dim: usize,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: String,
    pub timeout_ms: u64,
    pub max_retries: u32,
    pub backoff_ms: u64,
    pub concurrency: usize,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        Self {
            endpoint: String::new(),
            dim: DEFAULT_DIM,
            api_key_env: "FRTR_EMBED_API_KEY".into(),
            timeout_ms: 30_000,
            max_retries: 2,
            backoff_ms: 250,
            concurrency: 4,
        }
    }
}

/// HTTP client for a hosted multimodal embedding endpoint.
///
/// Request: `{"text": ...}` or `{"image_bytes": <base64>, "media_type": ...,
/// "caption": ...}`. Response: `{"vector": [..]}`. Authentication is a
/// bearer token read from the configured environment variable.
pub struct RemoteEmbedder {
    cfg: RemoteConfig,
    api_key: Option<String>,
    agent: ureq::Agent,
    gate: Gate,
}

impl RemoteEmbedder {
    pub fn new(cfg: RemoteConfig) -> Result<Self, EmbedError> {
        if cfg.endpoint.is_empty() {
            return Err(EmbedError::BadSpec("remote embedder needs an endpoint".into()));
        }
        if cfg.dim < MIN_DIM {
            return Err(EmbedError::BadSpec(format!(
                "dim must be >= {MIN_DIM}, got {}",
                cfg.dim
            )));
        }
        let api_key = std::env::var(&cfg.api_key_env).ok().filter(|k| !k.is_empty());
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(cfg.timeout_ms)))
            .build()
            .into();
        let gate = Gate::new(cfg.concurrency);
        Ok(Self {
            cfg,
            api_key,
            agent,
            gate,
        })
    }

    fn post(&self, body: serde_json::Value) -> Result<Embedding, EmbedError> {
        let _slot = self.gate.acquire();
        let attempts = self.cfg.max_retries + 1;
        let mut last: Option<EmbedError> = None;
        for attempt in 0..attempts {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(
                    self.cfg.backoff_ms << (attempt - 1),
                ));
            }
            let mut req = self.agent.post(&self.cfg.endpoint);
            if let Some(key) = &self.api_key {
                req = req.header("authorization", &format!("Bearer {key}"));
            }
            match req.send_json(&body) {
                Ok(mut resp) => {
                    let parsed: serde_json::Value =
                        resp.body_mut().read_json().map_err(|e| {
                            EmbedError::BadResponse(format!("invalid JSON body: {e}"))
                        })?;
                    let vector = parsed
                        .get("vector")
                        .and_then(|v| v.as_array())
                        .ok_or_else(|| {
                            EmbedError::BadResponse("response lacks a \"vector\" array".into())
                        })?;
                    let values: Vec<f32> = vector
                        .iter()
                        .map(|v| v.as_f64().map(|f| f as f32))
                        .collect::<Option<_>>()
                        .ok_or_else(|| {
                            EmbedError::BadResponse("vector holds non-numeric entries".into())
                        })?;
                    if values.len() != self.cfg.dim {
                        return Err(EmbedError::DimMismatch {
                            expected: self.cfg.dim,
                            got: values.len(),
                        });
                    }
                    return Embedding::unit(values);
                }
                Err(ureq::Error::StatusCode(code)) if code == 401 || code == 403 => {
                    return Err(EmbedError::Auth { status: code });
                }
                Err(ureq::Error::StatusCode(code)) if code == 429 || code >= 500 => {
                    last = Some(EmbedError::Transport {
                        message: format!("endpoint returned status {code}"),
                        retryable: true,
                        attempts: attempt + 1,
                    });
                }
                Err(ureq::Error::StatusCode(code)) => {
                    return Err(EmbedError::Transport {
                        message: format!("endpoint returned status {code}"),
                        retryable: false,
                        attempts: attempt + 1,
                    });
                }
                Err(e) => {
                    last = Some(EmbedError::Transport {
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

impl Embedder for RemoteEmbedder {
    fn dim(&self) -> usize {
        self.cfg.dim
    }

    fn embed_text(&self, text: &str) -> Result<Embedding, EmbedError> {
        if text.trim().is_empty() {
            return Err(EmbedError::EmptyText);
        }
        self.post(serde_json::json!({ "text": text }))
    }

    fn embed_image(
        &self,
        asset: &ImageAsset,
        caption: Option<&str>,
    ) -> Result<Embedding, EmbedError> {
        let b64 = base64::engine::general_purpose::STANDARD.encode(&asset.bytes);
        self.post(serde_json::json!({
            "image_bytes": b64,
            "media_type": asset.media_type,
            "caption": caption,
        }))
    }
}

/// Which embedder to construct; serializable so it can live in config files
/// and the index manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EmbedderSpec {
    ReferenceHash {
        #[serde(default = "default_dim")]
        dim: usize,
    },
    Remote(RemoteConfig),
}

fn default_dim() -> usize {
    DEFAULT_DIM
}

impl Default for EmbedderSpec {
    fn default() -> Self {
        EmbedderSpec::ReferenceHash { dim: DEFAULT_DIM }
    }
}

impl EmbedderSpec {
    pub fn dim(&self) -> usize {
        match self {
            EmbedderSpec::ReferenceHash { dim } => *dim,
            EmbedderSpec::Remote(cfg) => cfg.dim,
        }
    }

    pub fn build(&self) -> Result<Box<dyn Embedder>, EmbedError> {
        match self {
            EmbedderSpec::ReferenceHash { dim } => Ok(Box::new(HashEmbedder::new(*dim)?)),
            EmbedderSpec::Remote(cfg) => Ok(Box::new(RemoteEmbedder::new(cfg.clone())?)),
        }
    }
}

#[derive(Debug, Error)]
#[error("embedding failed for item {index} ({unit_id}): {source}")]
pub struct BatchEmbedError {
    pub index: usize,
    pub unit_id: String,
    #[source]
    pub source: EmbedError,
}

/// Embed a batch of units, order-preserving; element `i` equals the
/// single-item call on item `i`. The first failing element (by index) aborts
/// the batch.
pub fn embed_units(
    embedder: &dyn Embedder,
    units: &[Unit],
    images: &HashMap<String, ImageAsset>,
) -> Result<Vec<Embedding>, BatchEmbedError> {
    let results: Vec<Result<Embedding, EmbedError>> = units
        .par_iter()
        .map(|unit| match unit.kind {
            UnitKind::Image => {
                let id = unit.image_ref.as_deref().unwrap_or_default();
                let asset = images
                    .get(id)
                    .ok_or_else(|| EmbedError::MissingImage(id.to_string()))?;
                embedder.embed_image(asset, asset.caption.as_deref())
            }
            _ => embedder.embed_text(&unit.text),
        })
        .collect();
    let mut out = Vec::with_capacity(results.len());
    for (index, result) in results.into_iter().enumerate() {
        match result {
            Ok(e) => out.push(e),
            Err(source) => {
                return Err(BatchEmbedError {
                    index,
                    unit_id: units[index].unit_id.clone(),
                    source,
                })
            }
        }
    }
    Ok(out)
}
