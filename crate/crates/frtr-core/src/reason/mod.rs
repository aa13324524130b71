//! Prompt composition from fused hits and structured-answer parsing.
//!
//! Each retrieved chunk is rendered with explicit retrieval metadata:
//!
//! ```text
//! Chunk 1 (Score: 0.0164, Source: Vector)
//! Type: row | Sheet: Sales_Q4
//! ROW_42 [Sales_Q4]: ...
//! ```
//!
//! Image chunks additionally carry an `[image attached: <id>]` line and
//! their bytes travel as prompt attachments. Composition is pure: identical
//! inputs produce a byte-identical prompt.

mod client;
mod template;

pub use client::{
    build_client, AnswerClient, ClientError, GenRemoteConfig, GeneratorSpec, MockAnswerClient,
    RemoteAnswerClient,
};
pub use template::PROMPT_TEMPLATE;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decompose::{Unit, UnitKind};
use crate::index::{FusedHit, FusionSource, HybridIndex, StoredMedia};

#[derive(Debug, Error)]
pub enum ReasonError {
    #[error("fused hit references unknown unit {0:?}")]
    UnknownUnit(String),
    #[error("image unit {unit_id:?} references missing media {image_id:?}")]
    MissingMedia { unit_id: String, image_id: String },
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error("model reply is not parseable JSON with \"reasoning\" and \"answer\": {detail}")]
    Parse {
        detail: String,
        raw: String,
        latency_s: f64,
    },
}

/// Resolves unit ids and image payloads during prompt composition.
pub trait UnitResolver {
    fn resolve_unit(&self, unit_id: &str) -> Option<&Unit>;
    fn resolve_media(&self, image_id: &str) -> Option<&StoredMedia>;
}

impl UnitResolver for HybridIndex {
    fn resolve_unit(&self, unit_id: &str) -> Option<&Unit> {
        self.unit(unit_id)
    }

    fn resolve_media(&self, image_id: &str) -> Option<&StoredMedia> {
        self.media(image_id)
    }
}

/// One prompt attachment: raw image bytes plus provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptAttachment {
    pub bytes: Vec<u8>,
    pub media_type: String,
    pub unit_id: String,
}

/// Chunk provenance carried alongside the prompt, one entry per fused hit
/// in fused order. Serialized with `score` as the field name; the value is
/// the fused RRF score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkMeta {
    pub unit_id: String,
    #[serde(rename = "score")]
    pub rrf_score: f64,
    pub source: FusionSource,
    pub kind: UnitKind,
    pub sheet: String,
    /// Sheet-qualified A1 reference of the first cell the unit covers.
    pub anchor: Option<String>,
    /// Caption text for image units.
    pub caption: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptBundle {
    pub text: String,
    pub attachments: Vec<PromptAttachment>,
    pub token_estimate: usize,
    pub chunk_manifest: Vec<ChunkMeta>,
}

/// A parsed model reply. `raw` preserves the verbatim model output;
/// `latency_s` covers only the generation call, not retrieval or
/// composition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelAnswer {
    pub reasoning: String,
    pub answer: String,
    pub raw: String,
    pub latency_s: f64,
}

/// Approximate token count: `ceil(chars / 4)`. A declared heuristic (the
/// exact tokenizer is model-specific); swap in a real tokenizer behind this
/// function if exact counts matter.
pub fn estimate_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}

/// Render one retrieved chunk with its retrieval metadata header.
pub fn format_chunk(hit: &FusedHit, unit: &Unit, ordinal: usize) -> String {
    debug_assert!(ordinal >= 1);
    let mut out = format!(
        "Chunk {ordinal} (Score: {:.4}, Source: {})\nType: {} | Sheet: {}\n{}",
        hit.rrf_score, hit.source, unit.kind, unit.sheet, unit.text
    );
    if unit.kind == UnitKind::Image {
        let id = unit.image_ref.as_deref().unwrap_or("unknown");
        out.push_str(&format!("\n[image attached: {id}]"));
    }
    out
}

/// Chunk provenance for a fused hit list, in fused order. This is the one
/// manifest-assembly path: prompt composition, the `--dry-run` chunk list,
/// and the HTTP retrieve endpoint all go through it.
pub fn chunk_manifest(
    hits: &[FusedHit],
    units: &dyn UnitResolver,
) -> Result<Vec<ChunkMeta>, ReasonError> {
    hits.iter()
        .map(|hit| {
            let unit = units
                .resolve_unit(&hit.unit_id)
                .ok_or_else(|| ReasonError::UnknownUnit(hit.unit_id.clone()))?;
            let caption = match unit.kind {
                UnitKind::Image => unit
                    .image_ref
                    .as_deref()
                    .and_then(|id| units.resolve_media(id))
                    .and_then(|m| m.caption.clone()),
                _ => None,
            };
            Ok(ChunkMeta {
                unit_id: unit.unit_id.clone(),
                rrf_score: hit.rrf_score,
                source: hit.source,
                kind: unit.kind,
                sheet: unit.sheet.clone(),
                anchor: unit.first_cell_a1(),
                caption,
            })
        })
        .collect()
}

/// Instantiate the prompt template for `query` over `hits`, collecting
/// image attachments and the chunk manifest.
pub fn compose_prompt(
    query: &str,
    hits: &[FusedHit],
    units: &dyn UnitResolver,
) -> Result<PromptBundle, ReasonError> {
    let manifest = chunk_manifest(hits, units)?;
    let mut chunks = String::new();
    let mut attachments = Vec::new();

    for (i, hit) in hits.iter().enumerate() {
        let unit = units
            .resolve_unit(&hit.unit_id)
            .ok_or_else(|| ReasonError::UnknownUnit(hit.unit_id.clone()))?;
        if i > 0 {
            chunks.push_str("\n\n");
        }
        chunks.push_str(&format_chunk(hit, unit, i + 1));

        if unit.kind == UnitKind::Image {
            let image_id = unit.image_ref.as_deref().unwrap_or_default();
            let media =
                units
                    .resolve_media(image_id)
                    .ok_or_else(|| ReasonError::MissingMedia {
                        unit_id: unit.unit_id.clone(),
                        image_id: image_id.to_string(),
                    })?;
            attachments.push(PromptAttachment {
                bytes: media.bytes.clone(),
                media_type: media.media_type.clone(),
                unit_id: unit.unit_id.clone(),
            });
        }
    }

    // Splice by placeholder position so content containing literal
    // placeholder text cannot corrupt the template.
    let tpl = template::PROMPT_TEMPLATE;
    let chunks_at = tpl
        .find(template::CHUNKS_PLACEHOLDER)
        .expect("template has chunks placeholder");
    let task_at = tpl
        .find(template::TASK_PLACEHOLDER)
        .expect("template has task placeholder");
    let mut text = String::with_capacity(tpl.len() + chunks.len() + query.len());
    text.push_str(&tpl[..chunks_at]);
    text.push_str(&chunks);
    text.push_str(&tpl[chunks_at + template::CHUNKS_PLACEHOLDER.len()..task_at]);
    text.push_str(query);
    text.push_str(&tpl[task_at + template::TASK_PLACEHOLDER.len()..]);

    let token_estimate = estimate_tokens(&text);
    Ok(PromptBundle {
        text,
        attachments,
        token_estimate,
        chunk_manifest: manifest,
    })
}

#[derive(Debug, Error)]
#[error("cannot parse model reply: {detail}")]
pub struct AnswerParseError {
    pub detail: String,
    pub raw: String,
}

fn try_json_object(text: &str) -> Option<serde_json::Value> {
    serde_json::from_str::<serde_json::Value>(text)
        .ok()
        .filter(serde_json::Value::is_object)
}

fn strip_one_fence_pair(text: &str) -> Option<String> {
    let trimmed = text.trim();
    let rest = trimmed.strip_prefix("```")?;
    // Drop the info string ("json", "JSON", ...) up to the first newline.
    let body = match rest.find('\n') {
        Some(i) => &rest[i + 1..],
        None => rest,
    };
    let body = body.trim_end();
    let body = body.strip_suffix("```")?;
    Some(body.trim().to_string())
}

fn first_balanced_object(text: &str) -> Option<&str> {
    let start = text.find('{')?;
    let bytes = text.as_bytes();
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate().skip(start) {
        if in_string {
            if escaped {
                escaped = false;
            } else if b == b'\\' {
                escaped = true;
            } else if b == b'"' {
                in_string = false;
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(&text[start..=i]);
                }
            }
            _ => {}
        }
    }
    None
}

fn extract_fields(value: &serde_json::Value) -> Result<(String, String), String> {
    let obj = value.as_object().expect("caller checked");
    let field = |key: &str| -> Result<String, String> {
        match obj.get(key) {
            None => Err(format!("missing {key:?} key")),
            Some(serde_json::Value::String(s)) => Ok(s.clone()),
            Some(other) => Err(format!("{key:?} is not a string (got {other})")),
        }
    };
    Ok((field("reasoning")?, field("answer")?))
}

/// Parse a model reply into (reasoning, answer).
///
/// Strict JSON first; then one code-fence pair is stripped and parsing
/// retried; then the first balanced `{...}` object is extracted and
/// retried. Both keys must be present as strings.
pub fn parse_answer(raw: &str) -> Result<(String, String), AnswerParseError> {
    let candidates: [Option<serde_json::Value>; 3] = [
        try_json_object(raw),
        strip_one_fence_pair(raw).and_then(|s| try_json_object(&s)),
        first_balanced_object(raw).and_then(try_json_object),
    ];
    // The first strategy that yields an object decides: a parsed object
    // with missing keys is an error, not a reason to try the next fallback.
    match candidates.into_iter().flatten().next() {
        Some(candidate) => extract_fields(&candidate).map_err(|detail| AnswerParseError {
            detail,
            raw: raw.to_string(),
        }),
        None => Err(AnswerParseError {
            detail: "no JSON object found after fence and brace-extraction fallbacks".into(),
            raw: raw.to_string(),
        }),
    }
}

/// Call the answer generator and parse its reply. `latency_s` times only
/// the client call.
pub fn generate(bundle: &PromptBundle, client: &dyn AnswerClient) -> Result<ModelAnswer, ReasonError> {
    let started = std::time::Instant::now();
    let raw = client.complete(bundle)?;
    let latency_s = started.elapsed().as_secs_f64();
    match parse_answer(&raw) {
        Ok((reasoning, answer)) => Ok(ModelAnswer {
            reasoning,
            answer,
            raw,
            latency_s,
        }),
        Err(e) => Err(ReasonError::Parse {
            detail: e.detail,
            raw,
            latency_s,
        }),
    }
}
