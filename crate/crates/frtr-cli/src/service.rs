//! HTTP query service over an immutable index.
//!
//! Endpoints:
//! - `GET  /health`   -> `{status, format_version, dim, units}` (503 while loading)
//! - `POST /retrieve` -> `{"question", "k"?}` -> fused hits with provenance
//! - `POST /query`    -> `{"question", "k_final"?, "dry_run"?}` -> answer or prompt
//!
//! The index loads in the background after the socket binds; requests get
//! 503 until the load completes. A loaded index is immutable and shared
//! read-only across handlers; replacing it is a swap, never a mutation.

use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use axum::extract::rejection::JsonRejection;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;

use frtr_core::embed::Embedder;
use frtr_core::index::{HybridIndex, RetrievalConfig, FORMAT_VERSION};
use frtr_core::reason::{
    build_client, chunk_manifest, compose_prompt, generate, AnswerClient, ClientError, ReasonError,
};

use crate::config::AppConfig;

/// Everything a request needs, bundled so the whole thing swaps atomically
/// on (re)load.
pub struct ServiceCore {
    pub index: HybridIndex,
    pub embedder: Box<dyn Embedder>,
    pub client: Box<dyn AnswerClient>,
    pub retrieval: RetrievalConfig,
}

#[derive(Clone)]
pub struct AppState {
    core: Arc<RwLock<Option<Arc<ServiceCore>>>>,
}

impl AppState {
    pub fn empty() -> Self {
        Self {
            core: Arc::new(RwLock::new(None)),
        }
    }

    pub fn install(&self, core: ServiceCore) {
        *self.core.write().expect("state poisoned") = Some(Arc::new(core));
    }

    fn loaded(&self) -> Option<Arc<ServiceCore>> {
        self.core.read().expect("state poisoned").clone()
    }
}

pub fn build_core(cfg: &AppConfig, index_dir: &Path) -> anyhow::Result<ServiceCore> {
    let index = HybridIndex::load(index_dir)?;
    let embedder = cfg.embedder.build()?;
    if !index.is_empty() && embedder.dim() != index.dim() {
        anyhow::bail!(
            "embedder dimension {} does not match index dimension {}",
            embedder.dim(),
            index.dim()
        );
    }
    let client = build_client(&cfg.generator)?;
    Ok(ServiceCore {
        index,
        embedder,
        client,
        retrieval: cfg.retrieval.clone(),
    })
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/retrieve", post(retrieve))
        .route("/query", post(query))
        .with_state(state)
}

/// Bind, start the background index load, and serve until shutdown.
pub async fn serve(cfg: AppConfig, index_dir: PathBuf, addr: String) -> anyhow::Result<()> {
    let state = AppState::empty();
    let listener = tokio::net::TcpListener::bind(&addr).await?;
    log::info!("listening on {}", listener.local_addr()?);

    let load_state = state.clone();
    tokio::task::spawn_blocking(move || match build_core(&cfg, &index_dir) {
        Ok(core) => {
            log::info!(
                "index loaded: {} units, dim {}",
                core.index.len(),
                core.index.dim()
            );
            load_state.install(core);
        }
        Err(e) => log::error!("index load failed: {e:#}"),
    });

    axum::serve(listener, router(state)).await?;
    Ok(())
}

fn err_body(status: StatusCode, error: impl Into<String>) -> Response {
    (status, Json(json!({ "error": error.into() }))).into_response()
}

fn not_ready() -> Response {
    err_body(StatusCode::SERVICE_UNAVAILABLE, "index not loaded yet")
}

async fn health(State(state): State<AppState>) -> Response {
    match state.loaded() {
        None => (
            StatusCode::SERVICE_UNAVAILABLE,
            Json(json!({ "status": "loading" })),
        )
            .into_response(),
        Some(core) => {
            let stats = core.index.stats();
            Json(json!({
                "status": "ok",
                "format_version": FORMAT_VERSION,
                "dim": core.index.dim(),
                "units": {
                    "row": stats.n_rows,
                    "column": stats.n_columns,
                    "window": stats.n_windows,
                    "image": stats.n_images,
                    "total": stats.n_units,
                },
                "client": core.client.name(),
            }))
            .into_response()
        }
    }
}

#[derive(Debug, Deserialize)]
struct RetrieveRequest {
    question: String,
    k: Option<usize>,
}

async fn retrieve(
    State(state): State<AppState>,
    payload: Result<Json<RetrieveRequest>, JsonRejection>,
) -> Response {
    let Json(req) = match payload {
        Ok(p) => p,
        Err(rejection) => return err_body(StatusCode::BAD_REQUEST, rejection.to_string()),
    };
    if req.question.trim().is_empty() {
        return err_body(StatusCode::UNPROCESSABLE_ENTITY, "question is empty");
    }
    let Some(core) = state.loaded() else {
        return not_ready();
    };
    let result = tokio::task::spawn_blocking(move || {
        let mut cfg = core.retrieval.clone();
        if let Some(k) = req.k {
            cfg.k_final = k;
        }
        let hits = core.index.retrieve(&req.question, core.embedder.as_ref(), &cfg)?;
        let manifest = chunk_manifest(&hits, &core.index)
            .map_err(|e| frtr_core::index::IndexError::Corrupt {
                file: "units".into(),
                detail: e.to_string(),
            })?;
        Ok::<_, frtr_core::index::IndexError>((hits, manifest))
    })
    .await;
    match result {
        Ok(Ok((hits, manifest))) => Json(json!({
            "hits": manifest,
            "ranks": hits.iter().map(|h| json!({
                "unit_id": h.unit_id,
                "vector_rank": h.vector_rank,
                "lexical_rank": h.lexical_rank,
            })).collect::<Vec<_>>(),
        }))
        .into_response(),
        Ok(Err(e)) => err_body(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()),
        Err(join) => err_body(StatusCode::INTERNAL_SERVER_ERROR, join.to_string()),
    }
}

#[derive(Debug, Deserialize)]
struct QueryRequest {
    question: String,
    k_final: Option<usize>,
    #[serde(default)]
    dry_run: bool,
}

async fn query(
    State(state): State<AppState>,
    payload: Result<Json<QueryRequest>, JsonRejection>,
) -> Response {
    let Json(req) = match payload {
        Ok(p) => p,
        Err(rejection) => return err_body(StatusCode::BAD_REQUEST, rejection.to_string()),
    };
    if req.question.trim().is_empty() {
        return err_body(StatusCode::UNPROCESSABLE_ENTITY, "question is empty");
    }
    let Some(core) = state.loaded() else {
        return not_ready();
    };

    let result = tokio::task::spawn_blocking(move || run_query(&core, &req)).await;
    match result {
        Ok(response) => response,
        Err(join) => err_body(StatusCode::INTERNAL_SERVER_ERROR, join.to_string()),
    }
}

fn run_query(core: &ServiceCore, req: &QueryRequest) -> Response {
    let mut cfg = core.retrieval.clone();
    if let Some(k) = req.k_final {
        cfg.k_final = k;
    }
    let hits = match core.index.retrieve(&req.question, core.embedder.as_ref(), &cfg) {
        Ok(h) => h,
        Err(e) => return err_body(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()),
    };
    let bundle = match compose_prompt(&req.question, &hits, &core.index) {
        Ok(b) => b,
        Err(e) => return err_body(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    };

    if req.dry_run {
        return Json(json!({
            "prompt": bundle.text,
            "chunks": bundle.chunk_manifest,
            "tokens": bundle.token_estimate,
            "attachments": bundle.attachments.len(),
        }))
        .into_response();
    }

    match generate(&bundle, core.client.as_ref()) {
        Ok(answer) => Json(json!({
            "answer": answer.answer,
            "reasoning": answer.reasoning,
            "chunks": bundle.chunk_manifest,
            "tokens": bundle.token_estimate,
            "latency_s": answer.latency_s,
        }))
        .into_response(),
        Err(ReasonError::Parse { detail, raw, .. }) => (
            StatusCode::BAD_GATEWAY,
            Json(json!({
                "error": "model reply was not parseable",
                "detail": detail,
                "raw": raw,
                "retryable": false,
            })),
        )
            .into_response(),
        Err(ReasonError::Client(e)) => {
            let (retryable, attempts) = match &e {
                ClientError::Transport {
                    retryable,
                    attempts,
                    ..
                } => (*retryable, Some(*attempts)),
                _ => (false, None),
            };
            (
                StatusCode::BAD_GATEWAY,
                Json(json!({
                    "error": e.to_string(),
                    "retryable": retryable,
                    "attempts": attempts,
                })),
            )
                .into_response()
        }
        Err(other) => err_body(StatusCode::INTERNAL_SERVER_ERROR, other.to_string()),
    }
}
