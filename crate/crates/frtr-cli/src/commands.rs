//! Subcommand implementations. Every command has a `--json` mode; the human
//! output is a formatting layer over the same records.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use serde_json::json;

use frtr_core::bench::{index_for_eval, load_bench, run_eval, EvalOptions, EvalReport, GenSpec, Tier};
use frtr_core::index::HybridIndex;
use frtr_core::pipeline::{index_workbooks, PipelineConfig};
use frtr_core::reason::{build_client, compose_prompt, generate, ChunkMeta, ReasonError};
use frtr_core::xlsx::list_sheets;

use crate::config::AppConfig;

/// Exit codes for `frtr query`: retrieval came back empty, the generator
/// call failed, or the model reply would not parse.
pub const EXIT_RETRIEVAL_EMPTY: u8 = 2;
pub const EXIT_GENERATION_FAILED: u8 = 3;
pub const EXIT_PARSE_FAILED: u8 = 4;

pub fn cmd_index(
    cfg: &AppConfig,
    workbooks: &[PathBuf],
    out: &Path,
    exclude_sheets: &[String],
    json: bool,
) -> anyhow::Result<ExitCode> {
    let embedder = cfg.embedder.build().context("building embedder")?;
    let pipeline_cfg = PipelineConfig {
        ingest: cfg.ingest.clone(),
        decompose: cfg.decompose.clone(),
        exclude_sheets: exclude_sheets.to_vec(),
    };
    let meta = json!({
        "embedder": cfg.embedder,
        "decompose": cfg.decompose,
        "workbooks": workbooks.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        "excluded_sheets": exclude_sheets,
    });
    let outcome = index_workbooks(workbooks, embedder.as_ref(), &pipeline_cfg, meta)
        .context("building index")?;
    outcome.index.save(out).context("saving index")?;

    let stats = outcome.index.stats();
    let record = json!({
        "index_dir": out.display().to_string(),
        "workbooks": workbooks.len(),
        "cells": outcome.n_cells,
        "units": {
            "row": stats.n_rows,
            "column": stats.n_columns,
            "window": stats.n_windows,
            "image": stats.n_images,
            "total": stats.n_units,
        },
        "terms": stats.n_terms,
        "build_seconds": outcome.elapsed_s,
        "warnings": outcome.warnings,
    });
    if json {
        println!("{}", serde_json::to_string_pretty(&record)?);
    } else {
        println!(
            "indexed {} workbook(s), {} cells -> {}",
            workbooks.len(),
            outcome.n_cells,
            out.display()
        );
        println!(
            "units: {} rows, {} columns, {} windows, {} images ({} total)",
            stats.n_rows, stats.n_columns, stats.n_windows, stats.n_images, stats.n_units
        );
        println!("build time: {:.2}s", outcome.elapsed_s);
        for warning in &outcome.warnings {
            eprintln!("warning: {warning}");
        }
    }
    Ok(ExitCode::SUCCESS)
}

pub fn cmd_sheets(workbook: &Path, json: bool) -> anyhow::Result<ExitCode> {
    let sheets = list_sheets(workbook).context("listing sheets")?;
    if json {
        let record: Vec<_> = sheets
            .iter()
            .map(|(name, rows)| json!({"name": name, "rows": rows}))
            .collect();
        println!("{}", serde_json::to_string_pretty(&record)?);
    } else {
        println!("{:<32} rows", "sheet");
        for (name, rows) in &sheets {
            println!("{name:<32} {rows}");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn load_index(dir: &Path) -> anyhow::Result<HybridIndex> {
    if !dir.join("manifest.json").exists() {
        anyhow::bail!("{} is not an index directory (no manifest.json)", dir.display());
    }
    HybridIndex::load(dir).with_context(|| format!("loading index {}", dir.display()))
}

fn print_chunks(chunks: &[ChunkMeta]) {
    println!("{:<40} {:>8} {:<8} {:<8} {:<16} anchor", "unit", "score", "source", "kind", "sheet");
    for c in chunks {
        println!(
            "{:<40} {:>8.4} {:<8} {:<8} {:<16} {}",
            c.unit_id,
            c.rrf_score,
            c.source.to_string(),
            c.kind.to_string(),
            c.sheet,
            c.anchor.as_deref().unwrap_or("-")
        );
    }
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_query(
    cfg: &AppConfig,
    index_dir: &Path,
    question: &str,
    show_chunks: bool,
    json: bool,
    dry_run: bool,
    k_final: Option<usize>,
) -> anyhow::Result<ExitCode> {
    let index = load_index(index_dir)?;
    let embedder = cfg.embedder.build().context("building embedder")?;
    if !index.is_empty() && embedder.dim() != index.dim() {
        anyhow::bail!(
            "embedder dimension {} does not match index dimension {}",
            embedder.dim(),
            index.dim()
        );
    }
    let mut retrieval = cfg.retrieval.clone();
    if let Some(k) = k_final {
        retrieval.k_final = k;
    }

    let hits = index
        .retrieve(question, embedder.as_ref(), &retrieval)
        .context("retrieval")?;
    if hits.is_empty() {
        if json {
            println!("{}", json!({"error": "retrieval returned no results"}));
        } else {
            eprintln!("no results: the index returned nothing for this question");
        }
        return Ok(ExitCode::from(EXIT_RETRIEVAL_EMPTY));
    }

    let bundle = compose_prompt(question, &hits, &index).context("composing prompt")?;

    if dry_run {
        if json {
            println!(
                "{}",
                serde_json::to_string_pretty(&json!({
                    "prompt": bundle.text,
                    "chunks": bundle.chunk_manifest,
                    "tokens": bundle.token_estimate,
                    "attachments": bundle.attachments.len(),
                }))?
            );
        } else {
            println!("{}", bundle.text);
            println!("\n--- chunk manifest ({} tokens estimated) ---", bundle.token_estimate);
            print_chunks(&bundle.chunk_manifest);
        }
        return Ok(ExitCode::SUCCESS);
    }

    let client = build_client(&cfg.generator).context("building answer client")?;
    match generate(&bundle, client.as_ref()) {
        Ok(answer) => {
            if json {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&json!({
                        "answer": answer.answer,
                        "reasoning": answer.reasoning,
                        "chunks": bundle.chunk_manifest,
                        "tokens": bundle.token_estimate,
                        "latency_s": answer.latency_s,
                    }))?
                );
            } else {
                println!("answer:    {}", answer.answer);
                println!("reasoning: {}", answer.reasoning);
                println!(
                    "tokens: {}   latency: {:.2}s   client: {}",
                    bundle.token_estimate,
                    answer.latency_s,
                    client.name()
                );
                println!("\nprovenance:");
                if show_chunks {
                    print_chunks(&bundle.chunk_manifest);
                } else {
                    for c in &bundle.chunk_manifest {
                        println!("  {} ({}, {:.4})", c.unit_id, c.sheet, c.rrf_score);
                    }
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Err(ReasonError::Parse { detail, raw, .. }) => {
            if json {
                println!("{}", json!({"error": "unparseable model reply", "detail": detail, "raw": raw}));
            } else {
                eprintln!("parse failure: {detail}");
                eprintln!("raw reply: {raw}");
            }
            Ok(ExitCode::from(EXIT_PARSE_FAILED))
        }
        Err(e) => {
            if json {
                println!("{}", json!({"error": "generation failed", "detail": e.to_string()}));
            } else {
                eprintln!("generation failed: {e}");
            }
            Ok(ExitCode::from(EXIT_GENERATION_FAILED))
        }
    }
}

fn print_report_table(report: &EvalReport, client_name: &str) {
    println!(
        "{:<14} {:<10} {:>9} {:>12} {:>11}",
        "Technique", "Model", "Accuracy", "Mean Tokens", "Latency (s)"
    );
    println!(
        "{:<14} {:<10} {:>9.3} {:>12.2} {:>11.2}",
        "hybrid-rrf", client_name, report.answer_accuracy, report.mean_tokens, report.mean_latency_s
    );
    if report.mock_run {
        println!("(mock client: latencies suppressed for reproducibility)");
    }
    if report.partial {
        println!(
            "PARTIAL RESULTS: {}",
            report.abort_reason.as_deref().unwrap_or("aborted")
        );
    }
}

pub fn cmd_eval(
    cfg: &AppConfig,
    workbook: &Path,
    index_dir: Option<&Path>,
    out: &Path,
    json: bool,
) -> anyhow::Result<ExitCode> {
    let embedder = cfg.embedder.build().context("building embedder")?;
    let client = build_client(&cfg.generator).context("building answer client")?;

    // The workbook is always needed: cases come from its Questions sheet
    // and formula-equivalence checks evaluate against it.
    let (wb, cases) = load_bench(workbook).context("loading benchmark workbook")?;
    let index = match index_dir {
        Some(dir) => load_index(dir)?,
        None => index_for_eval(&wb, embedder.as_ref(), &cfg.decompose)
            .context("indexing benchmark workbook")?,
    };

    let opts = EvalOptions {
        retrieval: cfg.retrieval.clone(),
        parallelism: cfg.eval_parallelism,
    };
    let report = run_eval(&wb, &index, &cases, embedder.as_ref(), client.as_ref(), &opts)
        .context("running evaluation")?;

    std::fs::write(out, report.to_json())
        .with_context(|| format!("writing report {}", out.display()))?;

    if json {
        println!("{}", report.to_json());
    } else {
        print_report_table(&report, client.name());
        println!(
            "cases: {} correct of {}; report written to {}",
            report.n_correct,
            report.n_cases,
            out.display()
        );
    }
    Ok(ExitCode::SUCCESS)
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_generate(
    tier: Tier,
    out: &Path,
    seed: u64,
    rows: Option<usize>,
    sheets: Option<usize>,
    images: Option<usize>,
    cross: Option<usize>,
    questions: Option<usize>,
    plants: Option<usize>,
    json: bool,
) -> anyhow::Result<ExitCode> {
    let mut spec = GenSpec::for_tier(tier, seed);
    if let Some(v) = rows {
        spec.n_rows = v;
    }
    if let Some(v) = sheets {
        spec.n_data_sheets = v;
    }
    if let Some(v) = images {
        spec.n_images = v;
    }
    if let Some(v) = cross {
        spec.n_cross_sheet_formulas = v;
    }
    if let Some(v) = questions {
        spec.n_questions = v;
    }
    if let Some(v) = plants {
        spec.n_plants = v.max(spec.n_questions);
    }
    let generated = frtr_core::bench::generate_bench(&spec, out).context("generating workbook")?;
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(&json!({
                "workbook": generated.workbook_path.display().to_string(),
                "plant_map": generated.plant_map_path.display().to_string(),
                "spec": spec,
            }))?
        );
    } else {
        println!("workbook:  {}", generated.workbook_path.display());
        println!("plant map: {}", generated.plant_map_path.display());
    }
    Ok(ExitCode::SUCCESS)
}

