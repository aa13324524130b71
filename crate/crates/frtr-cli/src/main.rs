//! `frtr`: index spreadsheets, query them with hybrid retrieval, evaluate
//! against benchmark workbooks, generate synthetic benchmarks, and serve
//! the pipeline over HTTP.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use frtr_cli::commands;
use frtr_cli::config::AppConfig;
use frtr_cli::service;
use frtr_core::bench::Tier;

#[derive(Parser)]
#[command(
    name = "frtr",
    version,
    about = "Hybrid lexical-dense retrieval over Excel workbooks"
)]
struct Cli {
    /// Path to a TOML config file (fully optional; see README).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Emit machine-readable JSON instead of human tables.
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ingest, decompose, embed, and index workbooks into a directory.
    Index {
        /// One or more .xlsx files.
        #[arg(required = true)]
        workbooks: Vec<PathBuf>,
        /// Output index directory.
        #[arg(long, short)]
        out: PathBuf,
        /// Sheet name to leave out of the index (repeatable); pass
        /// "Questions" when indexing a benchmark workbook for querying.
        #[arg(long = "exclude-sheet")]
        exclude_sheets: Vec<String>,
    },
    /// List a workbook's sheets with approximate row counts.
    Sheets { workbook: PathBuf },
    /// Ask a question against a built index.
    Query {
        question: String,
        /// Index directory (falls back to config index_dir).
        #[arg(long)]
        index: Option<PathBuf>,
        /// Print the chunk provenance table after the answer.
        #[arg(long)]
        show_chunks: bool,
        /// Compose and print the prompt without calling any model.
        #[arg(long)]
        dry_run: bool,
        /// Override the number of fused chunks.
        #[arg(long)]
        k_final: Option<usize>,
    },
    /// Run the benchmark protocol over a workbook with a Questions sheet.
    Eval {
        /// Benchmark workbook (.xlsx with a Questions sheet).
        #[arg(long)]
        workbook: PathBuf,
        /// Optional prebuilt index directory; by default the workbook is
        /// indexed in memory with the Questions sheet excluded.
        #[arg(long)]
        index: Option<PathBuf>,
        /// Report output path (JSON).
        #[arg(long, default_value = "frtr_eval_report.json")]
        out: PathBuf,
    },
    /// Generate a synthetic benchmark workbook plus its plant map.
    Generate {
        #[arg(long)]
        tier: Tier,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Total rows across data sheets (headers included).
        #[arg(long)]
        rows: Option<usize>,
        /// Data sheet count (1-5).
        #[arg(long)]
        sheets: Option<usize>,
        #[arg(long)]
        images: Option<usize>,
        /// Cross-sheet consolidation formulas.
        #[arg(long)]
        cross: Option<usize>,
        /// Questions sheet rows (5-10).
        #[arg(long)]
        questions: Option<usize>,
        /// Planted lookup facts (plant-map entries).
        #[arg(long)]
        plants: Option<usize>,
    },
    /// Serve /health, /retrieve, and /query over HTTP.
    Serve {
        #[arg(long)]
        index: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1:8831")]
        addr: String,
    },
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn resolve_index_dir(flag: Option<PathBuf>, cfg: &AppConfig) -> anyhow::Result<PathBuf> {
    flag.or_else(|| cfg.index_dir.clone())
        .ok_or_else(|| anyhow::anyhow!("no index directory: pass --index or set index_dir in config"))
}

fn real_main() -> anyhow::Result<ExitCode> {
    let cli = Cli::parse();
    let cfg = AppConfig::load(cli.config.as_deref())?;
    let filter = std::env::var("RUST_LOG")
        .or_else(|_| std::env::var("FRTR_LOG"))
        .unwrap_or_else(|_| cfg.log.clone());
    env_logger::Builder::new().parse_filters(&filter).try_init().ok();

    match cli.command {
        Command::Index {
            workbooks,
            out,
            exclude_sheets,
        } => commands::cmd_index(&cfg, &workbooks, &out, &exclude_sheets, cli.json),
        Command::Sheets { workbook } => commands::cmd_sheets(&workbook, cli.json),
        Command::Query {
            question,
            index,
            show_chunks,
            dry_run,
            k_final,
        } => {
            let index_dir = resolve_index_dir(index, &cfg)?;
            commands::cmd_query(
                &cfg,
                &index_dir,
                &question,
                show_chunks,
                cli.json,
                dry_run,
                k_final,
            )
        }
        Command::Eval {
            workbook,
            index,
            out,
        } => commands::cmd_eval(&cfg, &workbook, index.as_deref(), &out, cli.json),
        Command::Generate {
            tier,
            out,
            seed,
            rows,
            sheets,
            images,
            cross,
            questions,
            plants,
        } => commands::cmd_generate(
            tier, &out, seed, rows, sheets, images, cross, questions, plants, cli.json,
        ),
        Command::Serve { index, addr } => {
            let index_dir = resolve_index_dir(index, &cfg)?;
            let runtime = tokio::runtime::Builder::new_multi_thread()
                .enable_all()
                .build()?;
            runtime.block_on(service::serve(cfg, index_dir, addr))?;
            Ok(ExitCode::SUCCESS)
        }
    }
}
