//! Benchmark harness: load benchmark-schema workbooks, generate synthetic
//! ones, score answers, and report accuracy / latency / token metrics.

mod formula;
mod generate;
mod score;

pub use formula::{collect_refs, eval_formula, parse_formula, FormulaError};
pub use generate::{
    build_bench_workbook, encode_png, generate_bench, load_plant_map, sidecar_path,
    GenSpec, GeneratedBench, PlantRecord, Tier,
};
pub use score::{check_answer, normalize_answer, numbers_match, parse_number, MatchedBy, Verdict};

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::addr::{parse_cell_ref, parse_range_ref, RangeRef};
use crate::decompose::{decompose_sheet, DecomposeConfig, UnitKind, UnitSpan};
use crate::embed::{embed_units, Embedder};
use crate::index::{
    build_index_with_media, FusedHit, HybridIndex, IndexError, RetrievalConfig, StoredMedia,
};
use crate::pipeline::PipelineError;
use crate::reason::{compose_prompt, generate as generate_answer, AnswerClient, ReasonError};
use crate::workbook::{ModelError, Workbook};
use crate::xlsx::{ingest_workbook, IngestOptions, XlsxError};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Xlsx(#[from] XlsxError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error("workbook {workbook} has no Questions sheet")]
    MissingQuestionsSheet { workbook: String },
    #[error("Questions sheet lacks a {column:?} column")]
    MissingColumn { column: &'static str },
    #[error("Questions sheet row {row}: {detail}")]
    BadRow { row: u32, detail: String },
    #[error("invalid generator spec: {0}")]
    BadGenSpec(String),
    #[error("empty case set")]
    EmptyCaseSet,
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// The reasoning category a benchmark question exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReasoningType {
    Lookup,
    Aggregation,
    CrossSheet,
    Image,
    Trend,
}

impl std::str::FromStr for ReasoningType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "lookup" => Ok(ReasoningType::Lookup),
            "aggregation" => Ok(ReasoningType::Aggregation),
            "cross-sheet" | "crosssheet" => Ok(ReasoningType::CrossSheet),
            "image" => Ok(ReasoningType::Image),
            "trend" => Ok(ReasoningType::Trend),
            other => Err(format!("unknown reasoning type {other:?}")),
        }
    }
}

/// One provenance entry: where a question's evidence lives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProvenanceItem {
    Cell { sheet: Option<String>, col: u32, row: u32 },
    Range(RangeRef),
    /// Formula text without the leading `=`.
    Formula(String),
    Image(String),
}

/// Parse one provenance item: `Sheet1!B5`, `B2:B10`, `=SUM(...)`, or
/// `Image ID: Chart_001`.
pub fn parse_provenance_item(text: &str) -> Result<ProvenanceItem, String> {
    let text = text.trim();
    if text.is_empty() {
        return Err("empty provenance item".into());
    }
    if let Some(id) = text
        .strip_prefix("Image ID:")
        .or_else(|| text.strip_prefix("image id:"))
        .or_else(|| text.strip_prefix("Image Id:"))
    {
        let id = id.trim();
        if id.is_empty() {
            return Err("image provenance with empty id".into());
        }
        return Ok(ProvenanceItem::Image(id.to_string()));
    }
    if let Some(f) = text.strip_prefix('=') {
        return Ok(ProvenanceItem::Formula(f.trim().to_string()));
    }
    // A colon outside a quoted sheet name means a range.
    let after_sheet = match text.rsplit_once('!') {
        Some((_, tail)) => tail,
        None => text,
    };
    if after_sheet.contains(':') {
        return parse_range_ref(text)
            .map(ProvenanceItem::Range)
            .map_err(|e| format!("bad range {text:?}: {e}"));
    }
    parse_cell_ref(text)
        .map(|r| ProvenanceItem::Cell {
            sheet: r.sheet,
            col: r.col,
            row: r.row,
        })
        .map_err(|e| format!("bad cell reference {text:?}: {e}"))
}

/// Split a provenance cell on top-level commas (commas inside parentheses
/// belong to formulas) and parse each item.
pub fn parse_provenance(text: &str) -> Result<Vec<ProvenanceItem>, String> {
    let mut items = Vec::new();
    let mut depth = 0usize;
    let mut start = 0usize;
    for (i, c) in text.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth = depth.saturating_sub(1),
            ',' if depth == 0 => {
                let piece = &text[start..i];
                if !piece.trim().is_empty() {
                    items.push(parse_provenance_item(piece)?);
                }
                start = i + 1;
            }
            _ => {}
        }
    }
    let piece = &text[start..];
    if !piece.trim().is_empty() {
        items.push(parse_provenance_item(piece)?);
    }
    if items.is_empty() {
        return Err("provenance is empty".into());
    }
    Ok(items)
}

/// One benchmark question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchCase {
    pub id: u32,
    pub question: String,
    pub reasoning_type: ReasoningType,
    pub provenance: Vec<ProvenanceItem>,
    pub gold_answer: String,
}

/// Ingest a benchmark workbook and parse its Questions sheet
/// (Question / ReasoningType / Provenance / Answer, any column order).
pub fn load_bench(path: &Path) -> Result<(Workbook, Vec<BenchCase>), BenchError> {
    let ingested = ingest_workbook(path, &IngestOptions::default())?;
    let wb = ingested.workbook;
    let cases = parse_questions_sheet(&wb)?;
    Ok((wb, cases))
}

/// Extract benchmark cases from an already-ingested workbook.
pub fn parse_questions_sheet(wb: &Workbook) -> Result<Vec<BenchCase>, BenchError> {
    let sheet = wb
        .sheet("Questions")
        .ok_or_else(|| BenchError::MissingQuestionsSheet {
            workbook: wb.source_path.clone(),
        })?;
    let Some(used) = sheet.used_range() else {
        return Err(BenchError::MissingColumn { column: "Question" });
    };

    let header_row = used.min_row;
    let mut cols: [Option<u32>; 4] = [None; 4];
    const NAMES: [&str; 4] = ["question", "reasoningtype", "provenance", "answer"];
    for cell in sheet.row(header_row) {
        let label = cell.value.render().trim().to_ascii_lowercase().replace([' ', '_'], "");
        if let Some(slot) = NAMES.iter().position(|n| *n == label) {
            cols[slot] = Some(cell.col);
        }
    }
    let column = |slot: usize, name: &'static str| -> Result<u32, BenchError> {
        cols[slot].ok_or(BenchError::MissingColumn { column: name })
    };
    let q_col = column(0, "Question")?;
    let t_col = column(1, "ReasoningType")?;
    let p_col = column(2, "Provenance")?;
    let a_col = column(3, "Answer")?;

    let mut cases = Vec::new();
    for row in (header_row + 1)..=used.max_row {
        let text_at = |col: u32| -> Option<String> {
            sheet
                .cell(col, row)
                .map(|c| c.value.render())
                .filter(|s| !s.trim().is_empty())
        };
        let question = text_at(q_col);
        let rtype = text_at(t_col);
        let prov = text_at(p_col);
        let answer = text_at(a_col);
        if question.is_none() && rtype.is_none() && prov.is_none() && answer.is_none() {
            continue;
        }
        let question = question.ok_or_else(|| BenchError::BadRow {
            row,
            detail: "missing question text".into(),
        })?;
        let reasoning_type: ReasoningType = rtype
            .ok_or_else(|| BenchError::BadRow {
                row,
                detail: "missing reasoning type".into(),
            })?
            .parse()
            .map_err(|e| BenchError::BadRow { row, detail: e })?;
        let provenance = parse_provenance(&prov.ok_or_else(|| BenchError::BadRow {
            row,
            detail: "missing provenance".into(),
        })?)
        .map_err(|detail| BenchError::BadRow { row, detail })?;
        let gold_answer = answer.ok_or_else(|| BenchError::BadRow {
            row,
            detail: "missing answer".into(),
        })?;
        cases.push(BenchCase {
            id: cases.len() as u32 + 1,
            question,
            reasoning_type,
            provenance,
            gold_answer,
        });
    }
    if cases.is_empty() {
        return Err(BenchError::BadRow {
            row: header_row,
            detail: "Questions sheet has a header but no question rows".into(),
        });
    }
    Ok(cases)
}

/// Index a benchmark workbook for evaluation: every sheet except
/// `Questions`. The Questions sheet holds the gold answers, so indexing it
/// would leak ground truth into retrieval.
pub fn index_for_eval(
    wb: &Workbook,
    embedder: &dyn Embedder,
    cfg: &DecomposeConfig,
) -> Result<HybridIndex, PipelineError> {
    cfg.validate()?;
    let data_sheets = || {
        wb.sheets
            .iter()
            .filter(|s| !s.name.eq_ignore_ascii_case("Questions"))
    };
    let units: Vec<_> = data_sheets().flat_map(|s| decompose_sheet(s, cfg)).collect();
    let images: std::collections::HashMap<String, crate::workbook::ImageAsset> = data_sheets()
        .flat_map(|s| s.images.iter())
        .map(|a| (a.id.clone(), a.clone()))
        .collect();
    let embeddings = embed_units(embedder, &units, &images)?;
    let media: Vec<StoredMedia> = images.values().map(StoredMedia::from).collect();
    Ok(build_index_with_media(units, embeddings, media)?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalOptions {
    pub retrieval: RetrievalConfig,
    /// Concurrent case limit; 1 runs sequentially with early abort on
    /// infrastructure errors.
    pub parallelism: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            retrieval: RetrievalConfig::default(),
            parallelism: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    pub case_id: u32,
    pub question: String,
    pub reasoning_type: ReasoningType,
    pub verdict: bool,
    pub matched_by: MatchedBy,
    pub tokens: usize,
    pub latency_s: f64,
    /// Whether any fused hit covered a provenance cell, range, or image.
    /// Diagnostic only; it never gates correctness.
    pub provenance_aligned: bool,
    pub answer: Option<String>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_cases: usize,
    pub n_correct: usize,
    pub answer_accuracy: f64,
    pub mean_tokens: f64,
    pub mean_latency_s: f64,
    /// True when the client is deterministic (mock); such runs zero their
    /// latencies so reports are byte-identical across runs.
    pub mock_run: bool,
    pub partial: bool,
    pub abort_reason: Option<String>,
    pub per_case: Vec<CaseResult>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn spans_intersect(
    span: &UnitSpan,
    sheet: &str,
    target_sheet: &str,
    range: &RangeRef,
) -> bool {
    if !sheet.eq_ignore_ascii_case(target_sheet) {
        return false;
    }
    match span {
        UnitSpan::Image { .. } => false,
        UnitSpan::Cells {
            start_col,
            start_row,
            end_col,
            end_row,
        } => {
            let cols = *start_col <= range.end_col && range.start_col <= *end_col;
            let rows = match range.rows {
                None => true,
                Some((r1, r2)) => *start_row <= r2 && r1 <= *end_row,
            };
            cols && rows
        }
    }
}

/// Did any fused hit cover any provenance target?
pub fn provenance_aligned(
    provenance: &[ProvenanceItem],
    hits: &[FusedHit],
    index: &HybridIndex,
    wb: &Workbook,
) -> bool {
    let context_sheet = wb.sheets.first().map(|s| s.name.clone()).unwrap_or_default();
    let mut ranges: Vec<(String, RangeRef)> = Vec::new();
    let mut image_ids: Vec<String> = Vec::new();
    for item in provenance {
        match item {
            ProvenanceItem::Cell { sheet, col, row } => ranges.push((
                sheet.clone().unwrap_or_else(|| context_sheet.clone()),
                RangeRef {
                    sheet: sheet.clone(),
                    start_col: *col,
                    end_col: *col,
                    rows: Some((*row, *row)),
                },
            )),
            ProvenanceItem::Range(r) => ranges.push((
                r.sheet.clone().unwrap_or_else(|| context_sheet.clone()),
                r.clone(),
            )),
            ProvenanceItem::Formula(f) => {
                if let Ok(refs) = collect_refs(f) {
                    for r in refs {
                        ranges.push((
                            r.sheet.clone().unwrap_or_else(|| context_sheet.clone()),
                            r,
                        ));
                    }
                }
            }
            ProvenanceItem::Image(id) => image_ids.push(id.clone()),
        }
    }
    hits.iter().any(|hit| {
        let Some(unit) = index.unit(&hit.unit_id) else {
            return false;
        };
        if unit.kind == UnitKind::Image {
            return unit
                .image_ref
                .as_deref()
                .is_some_and(|id| image_ids.iter().any(|want| want == id));
        }
        ranges
            .iter()
            .any(|(sheet, range)| spans_intersect(&unit.span, &unit.sheet, sheet, range))
    })
}

/// Run the full pipeline over every case: retrieve, compose, generate,
/// parse, check. Parse failures score as incorrect; transport-level
/// failures abort the run with partial results flagged.
pub fn run_eval(
    wb: &Workbook,
    index: &HybridIndex,
    cases: &[BenchCase],
    embedder: &dyn Embedder,
    client: &dyn AnswerClient,
    opts: &EvalOptions,
) -> Result<EvalReport, BenchError> {
    if cases.is_empty() {
        return Err(BenchError::EmptyCaseSet);
    }
    let mock_run = client.is_deterministic();

    let run_case = |case: &BenchCase| -> Result<CaseResult, String> {
        let hits = index
            .retrieve(&case.question, embedder, &opts.retrieval)
            .map_err(|e| format!("case {}: retrieval failed: {e}", case.id))?;
        let bundle = compose_prompt(&case.question, &hits, index)
            .map_err(|e| format!("case {}: prompt composition failed: {e}", case.id))?;
        let aligned = provenance_aligned(&case.provenance, &hits, index, wb);
        match generate_answer(&bundle, client) {
            Ok(answer) => {
                let verdict = check_answer(&answer.answer, &case.gold_answer, wb);
                Ok(CaseResult {
                    case_id: case.id,
                    question: case.question.clone(),
                    reasoning_type: case.reasoning_type,
                    verdict: verdict.correct,
                    matched_by: verdict.matched_by,
                    tokens: bundle.token_estimate,
                    latency_s: if mock_run { 0.0 } else { answer.latency_s },
                    provenance_aligned: aligned,
                    answer: Some(answer.answer),
                    failure: None,
                })
            }
            Err(ReasonError::Parse { detail, latency_s, .. }) => Ok(CaseResult {
                case_id: case.id,
                question: case.question.clone(),
                reasoning_type: case.reasoning_type,
                verdict: false,
                matched_by: MatchedBy::None,
                tokens: bundle.token_estimate,
                latency_s: if mock_run { 0.0 } else { latency_s },
                provenance_aligned: aligned,
                answer: None,
                failure: Some(format!("unparseable model reply: {detail}")),
            }),
            Err(other) => Err(format!("case {}: generation failed: {other}", case.id)),
        }
    };

    let mut partial = false;
    let mut abort_reason = None;
    let mut per_case: Vec<CaseResult> = Vec::new();

    if opts.parallelism <= 1 {
        for case in cases {
            match run_case(case) {
                Ok(result) => per_case.push(result),
                Err(reason) => {
                    partial = true;
                    abort_reason = Some(reason);
                    break;
                }
            }
        }
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.parallelism)
            .build()
            .map_err(|e| BenchError::BadGenSpec(format!("thread pool: {e}")))?;
        let results: Vec<Result<CaseResult, String>> =
            pool.install(|| cases.par_iter().map(run_case).collect());
        for result in results {
            match result {
                Ok(r) => per_case.push(r),
                Err(reason) => {
                    partial = true;
                    abort_reason = Some(reason);
                    break;
                }
            }
        }
    }

    let n_cases = per_case.len();
    let n_correct = per_case.iter().filter(|c| c.verdict).count();
    let mean = |f: &dyn Fn(&CaseResult) -> f64| -> f64 {
        if n_cases == 0 {
            0.0
        } else {
            per_case.iter().map(f).sum::<f64>() / n_cases as f64
        }
    };
    Ok(EvalReport {
        n_cases,
        n_correct,
        answer_accuracy: if n_cases == 0 {
            0.0
        } else {
            n_correct as f64 / n_cases as f64
        },
        mean_tokens: mean(&|c| c.tokens as f64),
        mean_latency_s: mean(&|c| c.latency_s),
        mock_run,
        partial,
        abort_reason,
        per_case,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn provenance_items_parse() {
        assert_eq!(
            parse_provenance_item("Consolidation!E47").unwrap(),
            ProvenanceItem::Cell {
                sheet: Some("Consolidation".into()),
                col: 5,
                row: 47
            }
        );
        assert_eq!(
            parse_provenance_item("Image ID: Chart_001").unwrap(),
            ProvenanceItem::Image("Chart_001".into())
        );
        assert!(matches!(
            parse_provenance_item("=SUM(EMEA_Sales!D:D, EMEA_Ops!E:E)").unwrap(),
            ProvenanceItem::Formula(_)
        ));
        assert!(matches!(
            parse_provenance_item("Sheet1!B2:B100").unwrap(),
            ProvenanceItem::Range(_)
        ));
        assert!(parse_provenance_item("?!?").is_err());
    }

    #[test]
    fn provenance_splits_on_top_level_commas_only() {
        let items =
            parse_provenance("Consolidation!E47, =SUM(EMEA_Sales!D:D, EMEA_Ops!E:E)").unwrap();
        assert_eq!(items.len(), 2);
        assert!(matches!(items[0], ProvenanceItem::Cell { .. }));
        assert!(matches!(items[1], ProvenanceItem::Formula(_)));
    }

    #[test]
    fn reasoning_types_parse() {
        assert_eq!("cross-sheet".parse::<ReasoningType>(), Ok(ReasoningType::CrossSheet));
        assert_eq!("Lookup".parse::<ReasoningType>(), Ok(ReasoningType::Lookup));
        assert_eq!("TREND".parse::<ReasoningType>(), Ok(ReasoningType::Trend));
        assert!("telepathy".parse::<ReasoningType>().is_err());
    }
}
