//! Multi-granular spreadsheet retrieval.
//!
//! Workbooks are decomposed into row, column, square-window, and image
//! units; units are indexed with both a BM25 lexical field and a dense
//! vector field; queries run both searches and fuse the ranked lists with
//! reciprocal rank fusion; the fused top chunks are composed into a
//! reasoning prompt whose answer comes back as structured JSON.
//!
//! ```text
//!  .xlsx ─► ingest ─► decompose ─► embed ─► HybridIndex ─┐
//!                                                        ├─► RRF ─► prompt ─► answer
//!  query ──────────────► embed ─► dense ─┐               │
//!        └─────────────────────► BM25  ──┴───────────────┘
//! ```
//!
//! Everything runs offline: the reference embedder is deterministic
//! feature hashing and the mock answer client echoes grounded cell
//! references, so the full pipeline is testable without any hosted model.
//! Remote embedding and generation clients slot in behind the same traits.

pub mod addr;
pub mod bench;
pub mod decompose;
pub mod embed;
pub mod index;
pub mod pipeline;
pub mod reason;
pub mod text;
pub mod workbook;
pub mod xlsx;

pub use addr::{parse_a1, render_a1, CellAddress, CellRef, RangeRef};
pub use bench::{
    check_answer, eval_formula, generate_bench, load_bench, run_eval, BenchCase, BenchError,
    EvalOptions, EvalReport, GenSpec, MatchedBy, Tier,
};
pub use decompose::{
    decompose_sheet, decompose_workbook, window_size, DecomposeConfig, Unit, UnitKind, UnitSpan,
};
pub use embed::{Embedder, EmbedderSpec, Embedding, HashEmbedder};
pub use index::{
    build_index, fuse_rrf, FusedHit, FusionSource, HybridIndex, IndexError, RetrievalConfig,
};
pub use pipeline::{full_serialization_tokens, index_workbook, index_workbooks, PipelineConfig};
pub use reason::{
    chunk_manifest, compose_prompt, estimate_tokens, format_chunk, parse_answer, AnswerClient,
    ChunkMeta, GeneratorSpec, MockAnswerClient, ModelAnswer, PromptBundle,
};
pub use workbook::{Cell, CellValue, ImageAsset, Sheet, Workbook};
pub use xlsx::{ingest_workbook, list_sheets, write_workbook, IngestOptions, WriteOptions};
