//! End-to-end index construction: ingest, decompose, embed, build.

use std::collections::HashMap;
use std::time::Instant;

use thiserror::Error;

use crate::decompose::{decompose_workbook, DecomposeConfig, DecomposeError};
use crate::embed::{embed_units, BatchEmbedError, Embedder};
use crate::index::{build_index_with_media, HybridIndex, IndexError, StoredMedia};
use crate::workbook::Workbook;
use crate::xlsx::{ingest_workbook, IngestOptions, XlsxError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Xlsx(#[from] XlsxError),
    #[error(transparent)]
    Decompose(#[from] DecomposeError),
    #[error(transparent)]
    Embed(#[from] BatchEmbedError),
    #[error(transparent)]
    Index(#[from] IndexError),
}

#[derive(Debug, Clone, Default)]
pub struct PipelineConfig {
    pub ingest: IngestOptions,
    pub decompose: DecomposeConfig,
    /// Sheet names (case-insensitive) left out of the index; the benchmark
    /// harness excludes "Questions" this way.
    pub exclude_sheets: Vec<String>,
}

impl PipelineConfig {
    fn excluded(&self, sheet: &str) -> bool {
        self.exclude_sheets
            .iter()
            .any(|s| s.eq_ignore_ascii_case(sheet))
    }
}

pub struct BuildOutcome {
    pub index: HybridIndex,
    pub warnings: Vec<String>,
    pub n_cells: usize,
    pub elapsed_s: f64,
}

/// Index one in-memory workbook (no id namespacing).
pub fn index_workbook(
    wb: &Workbook,
    embedder: &dyn Embedder,
    decompose_cfg: &DecomposeConfig,
) -> Result<HybridIndex, PipelineError> {
    decompose_cfg.validate()?;
    let units = decompose_workbook(wb, decompose_cfg);
    let images: HashMap<String, crate::workbook::ImageAsset> = wb
        .images()
        .map(|(_, asset)| (asset.id.clone(), asset.clone()))
        .collect();
    let embeddings = embed_units(embedder, &units, &images)?;
    let media: Vec<StoredMedia> = images.values().map(StoredMedia::from).collect();
    Ok(build_index_with_media(units, embeddings, media)?)
}

/// Ingest and index one or more workbook files. With several workbooks,
/// unit and image ids are namespaced by the file stem so they stay unique
/// across the corpus.
pub fn index_workbooks(
    paths: &[std::path::PathBuf],
    embedder: &dyn Embedder,
    cfg: &PipelineConfig,
    meta: serde_json::Value,
) -> Result<BuildOutcome, PipelineError> {
    cfg.decompose.validate()?;
    let started = Instant::now();
    let mut warnings = Vec::new();
    let mut all_units = Vec::new();
    let mut all_images: HashMap<String, crate::workbook::ImageAsset> = HashMap::new();
    let mut n_cells = 0usize;
    let namespaced = paths.len() > 1;
    let mut seen_stems: HashMap<String, usize> = HashMap::new();

    for path in paths {
        let ingested = ingest_workbook(path, &cfg.ingest)?;
        warnings.extend(
            ingested
                .warnings
                .into_iter()
                .map(|w| format!("{}: {w}", path.display())),
        );
        let wb = ingested.workbook;
        n_cells += wb.n_cells();

        let prefix = if namespaced {
            let stem = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("workbook")
                .to_string();
            let n = seen_stems.entry(stem.clone()).or_insert(0);
            *n += 1;
            if *n > 1 {
                format!("{stem}#{n}/")
            } else {
                format!("{stem}/")
            }
        } else {
            String::new()
        };

        let mut units = decompose_workbook(&wb, &cfg.decompose);
        units.retain(|u| !cfg.excluded(&u.sheet));
        for unit in &mut units {
            unit.unit_id = format!("{prefix}{}", unit.unit_id);
            if let Some(image_ref) = &mut unit.image_ref {
                *image_ref = format!("{prefix}{image_ref}");
            }
        }
        all_units.extend(units);
        for (sheet, asset) in wb.images() {
            if cfg.excluded(&sheet.name) {
                continue;
            }
            let mut asset = asset.clone();
            asset.id = format!("{prefix}{}", asset.id);
            all_images.insert(asset.id.clone(), asset.clone());
        }
    }

    let embeddings = embed_units(embedder, &all_units, &all_images)?;
    let media: Vec<StoredMedia> = all_images.values().map(StoredMedia::from).collect();
    let mut index = build_index_with_media(all_units, embeddings, media)?;
    index.meta = meta;
    Ok(BuildOutcome {
        index,
        warnings,
        n_cells,
        elapsed_s: started.elapsed().as_secs_f64(),
    })
}

/// Token estimate for serializing the whole workbook row by row (the
/// naive full-context measure the compression ratio is taken against).
pub fn full_serialization_tokens(wb: &Workbook) -> usize {
    let mut chars = 0usize;
    for sheet in &wb.sheets {
        chars += "SHEET ".chars().count() + sheet.name.chars().count() + 1;
        let Some(used) = sheet.used_range() else {
            continue;
        };
        for row in used.min_row..=used.max_row {
            let mut line = format!("r{row}:");
            let cells: HashMap<u32, String> = sheet
                .row(row)
                .map(|c| (c.col, c.value.render()))
                .collect();
            for col in used.min_col..=used.max_col {
                if col > used.min_col {
                    line.push_str(" |");
                }
                line.push(' ');
                if let Some(v) = cells.get(&col) {
                    line.push_str(v);
                }
            }
            chars += line.chars().count() + 1;
        }
    }
    chars.div_ceil(4)
}
