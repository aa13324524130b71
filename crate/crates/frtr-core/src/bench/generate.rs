//! Synthetic benchmark workbook generator.
//!
//! Output replicates the benchmark schema: a `Metadata` sheet, 1-5 data
//! sheets, embedded PNG charts with captions, cross-sheet consolidation
//! formulas, and a `Questions` sheet (Question / ReasoningType / Provenance
//! / Answer). Every generated question is anchored to a planted unique
//! "fact token", and a sidecar plant map (JSON lines) records, per
//! question, the token, the gold cell(s), and the unit ids that carry it,
//! so retrieval quality is mechanically checkable without any model.
//!
//! Gold answers are written so the deterministic mock answer client scores
//! 1.0 on them: lookup and cross-sheet answers are the sheet-qualified A1
//! reference of the planted row's first cell (which the mock echoes for the
//! top-ranked chunk), image answers are the caption verbatim.
//!
//! Generation is a pure function of the spec: the same seed yields a
//! byte-identical workbook file.

use std::collections::HashSet;
use std::io::Write as IoWrite;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::addr::CellAddress;
use crate::workbook::{CellValue, ImageAsset, Sheet, Workbook};
use crate::xlsx::{serial_to_iso, write_workbook, WriteOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Easy,
    Medium,
    Hard,
}

impl Tier {
    /// Inclusive row-count bounds per workbook (headers included).
    pub fn row_bounds(self) -> (usize, usize) {
        match self {
            Tier::Easy => (10, 4_999),
            Tier::Medium => (5_000, 20_000),
            Tier::Hard => (20_000, 210_000),
        }
    }
}

impl std::str::FromStr for Tier {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "easy" => Ok(Tier::Easy),
            "medium" => Ok(Tier::Medium),
            "hard" => Ok(Tier::Hard),
            other => Err(format!("unknown tier {other:?} (easy|medium|hard)")),
        }
    }
}

impl std::fmt::Display for Tier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Tier::Easy => "easy",
            Tier::Medium => "medium",
            Tier::Hard => "hard",
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenSpec {
    pub tier: Tier,
    /// Data sheets (1..=5), not counting Metadata and Questions.
    pub n_data_sheets: usize,
    /// Total rows across data sheets, header rows included; must respect
    /// the tier bounds.
    pub n_rows: usize,
    pub n_images: usize,
    pub n_cross_sheet_formulas: usize,
    /// Rows in the Questions sheet (5..=10).
    pub n_questions: usize,
    /// Planted lookup facts; every plant gets a plant-map entry even when
    /// it does not appear on the Questions sheet, so retrieval can be
    /// scored over far more probes than the schema's question budget.
    pub n_plants: usize,
    pub seed: u64,
}

impl GenSpec {
    pub fn for_tier(tier: Tier, seed: u64) -> GenSpec {
        match tier {
            Tier::Easy => GenSpec {
                tier,
                n_data_sheets: 2,
                n_rows: 900,
                n_images: 1,
                n_cross_sheet_formulas: 1,
                n_questions: 6,
                n_plants: 6,
                seed,
            },
            Tier::Medium => GenSpec {
                tier,
                n_data_sheets: 3,
                n_rows: 9_000,
                n_images: 2,
                n_cross_sheet_formulas: 1,
                n_questions: 8,
                n_plants: 10,
                seed,
            },
            Tier::Hard => GenSpec {
                tier,
                n_data_sheets: 3,
                n_rows: 60_000,
                n_images: 2,
                n_cross_sheet_formulas: 2,
                n_questions: 8,
                n_plants: 12,
                seed,
            },
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |msg: String| Err(BenchError::BadGenSpec(msg));
        let (lo, hi) = self.tier.row_bounds();
        if self.n_rows < lo || self.n_rows > hi {
            return bad(format!(
                "tier {} requires between {lo} and {hi} rows, got {}",
                self.tier, self.n_rows
            ));
        }
        if !(1..=5).contains(&self.n_data_sheets) {
            return bad(format!("n_data_sheets must be 1..=5, got {}", self.n_data_sheets));
        }
        if !(5..=10).contains(&self.n_questions) {
            return bad(format!("n_questions must be 5..=10, got {}", self.n_questions));
        }
        if self.n_plants < self.n_questions {
            return bad(format!(
                "n_plants ({}) must cover n_questions ({})",
                self.n_plants, self.n_questions
            ));
        }
        if self.n_cross_sheet_formulas > 0 && self.n_data_sheets < 2 {
            return bad("cross-sheet formulas need at least 2 data sheets".into());
        }
        let data_rows = self.n_rows.saturating_sub(self.n_data_sheets); // headers
        if self.n_plants + self.n_cross_sheet_formulas + 4 > data_rows {
            return bad(format!(
                "{} plants do not fit in {data_rows} data rows",
                self.n_plants
            ));
        }
        Ok(())
    }
}

/// One plant-map record (serialized as one JSON line).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlantRecord {
    pub id: u32,
    pub kind: String, // "lookup" | "cross-sheet" | "image"
    pub token: String,
    pub question: String,
    pub gold_answer: String,
    pub sheet: String,
    /// Sheet-qualified A1 references of the cells holding the fact.
    pub gold_cells: Vec<String>,
    /// Unit ids (under default decomposition) that carry the fact.
    pub gold_unit_ids: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct GeneratedBench {
    pub workbook_path: PathBuf,
    pub plant_map_path: PathBuf,
}

const SHEET_POOL: [&str; 5] = ["Sales", "Ops", "Inventory", "Payroll", "Regional"];
const REGIONS: [&str; 4] = ["EMEA", "APAC", "AMER", "LATAM"];
const CATEGORIES: [&str; 6] = [
    "hardware", "software", "services", "logistics", "travel", "facilities",
];
const CHART_PATTERNS: [&str; 4] = [
    "increasing steadily",
    "declining gradually",
    "fluctuating with the seasons",
    "peaking in the third quarter",
];

fn unique_token(rng: &mut ChaCha8Rng, prefix: &str, used: &mut HashSet<String>) -> String {
    loop {
        let token = format!("{prefix}{:08x}", rng.random::<u32>());
        if used.insert(token.clone()) {
            return token;
        }
    }
}

struct QuestionRow {
    question: String,
    reasoning_type: &'static str,
    provenance: String,
    answer: String,
}

/// Build the workbook model, plant map, and question rows in memory.
pub fn build_bench_workbook(
    spec: &GenSpec,
) -> Result<(Workbook, Vec<PlantRecord>), BenchError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut used_tokens = HashSet::new();

    // Split total rows (headers included) across data sheets.
    let base = spec.n_rows / spec.n_data_sheets;
    let mut sheet_rows: Vec<usize> = vec![base; spec.n_data_sheets];
    for slot in sheet_rows.iter_mut().take(spec.n_rows % spec.n_data_sheets) {
        *slot += 1;
    }
    // Reserve room on the last sheet for consolidation rows.
    let names: Vec<&str> = SHEET_POOL[..spec.n_data_sheets].to_vec();

    let mut data_sheets: Vec<Sheet> = Vec::new();
    for (i, name) in names.iter().enumerate() {
        let mut sheet = Sheet::new(*name);
        for (c, h) in ["RecordID", "Region", "Category", "Quarter", "Date", "Amount"]
            .iter()
            .enumerate()
        {
            sheet.set_value(c as u32 + 1, 1, CellValue::Text((*h).to_string()));
        }
        let rows = sheet_rows[i];
        for r in 2..=rows as u32 {
            sheet.set_value(1, r, CellValue::Text(format!("ID{}R{r}", i + 1)));
            sheet.set_value(
                2,
                r,
                CellValue::Text(REGIONS[rng.random_range(0..REGIONS.len())].to_string()),
            );
            sheet.set_value(
                3,
                r,
                CellValue::Text(CATEGORIES[rng.random_range(0..CATEGORIES.len())].to_string()),
            );
            sheet.set_value(4, r, CellValue::Text(format!("Q{}", rng.random_range(1..=4))));
            let serial = 45_000 + rng.random_range(0..365) as i64;
            sheet.set_value(
                5,
                r,
                CellValue::Date {
                    serial: serial as f64,
                    display: Some(serial_to_iso(serial as f64)),
                },
            );
            let mut amount = rng.random_range(100..5_000_000) as f64;
            if rng.random_bool(0.25) {
                amount += 0.25 * rng.random_range(1..4) as f64;
            }
            sheet.set_value(6, r, CellValue::Number(amount));
        }
        data_sheets.push(sheet);
    }

    let mut plants: Vec<PlantRecord> = Vec::new();
    let mut questions: Vec<QuestionRow> = Vec::new();
    let mut plant_id = 0u32;

    // Lookup plants: overwrite the RecordID of distinct data rows with a
    // unique fact token. The question echoes the row's attributes so the
    // planted row dominates the dense list as well as the lexical one;
    // a gold unit present in both ranked lists outranks any single-list
    // competitor after fusion.
    let mut taken: HashSet<(usize, u32)> = HashSet::new();
    for _ in 0..spec.n_plants {
        let (si, row) = loop {
            let si = rng.random_range(0..spec.n_data_sheets);
            let max_row = sheet_rows[si] as u32;
            if max_row < 2 {
                continue;
            }
            let row = rng.random_range(2..=max_row);
            if taken.insert((si, row)) {
                break (si, row);
            }
        };
        let token = unique_token(&mut rng, "FACT", &mut used_tokens);
        let sheet_name = names[si].to_string();
        data_sheets[si].set_value(1, row, CellValue::Text(token.clone()));
        let attr = |col: u32| {
            data_sheets[si]
                .cell(col, row)
                .map(|c| c.value.render())
                .unwrap_or_default()
        };
        let (region, category, quarter, date) = (attr(2), attr(3), attr(4), attr(5));
        plant_id += 1;
        let gold_answer = format!("{sheet_name}!A{row}");
        let question = format!(
            "What is the amount for record {token} ({region}, {category}, {quarter}, dated {date})?"
        );
        plants.push(PlantRecord {
            id: plant_id,
            kind: "lookup".into(),
            token: token.clone(),
            question: question.clone(),
            gold_answer: gold_answer.clone(),
            sheet: sheet_name.clone(),
            gold_cells: vec![
                format!("{sheet_name}!A{row}"),
                format!("{sheet_name}!F{row}"),
            ],
            gold_unit_ids: vec![
                format!("{sheet_name}/row:{row}"),
                format!("{sheet_name}/col:A"),
            ],
        });
        questions.push(QuestionRow {
            question,
            reasoning_type: "lookup",
            provenance: format!("{sheet_name}!A{row}, {sheet_name}!F{row}"),
            answer: gold_answer,
        });
    }

    // Cross-sheet consolidation rows on the last data sheet, each with a
    // cached value the formula grammar can re-derive.
    let last = spec.n_data_sheets - 1;
    let first_free_row = sheet_rows[last] as u32 + 1;
    for i in 0..spec.n_cross_sheet_formulas {
        let a = i % (spec.n_data_sheets - 1);
        let b = a + 1;
        let (ra, rb) = (sheet_rows[a] as u32, sheet_rows[b] as u32);
        let formula = format!("SUM({}!F2:F{ra}, {}!F2:F{rb})", names[a], names[b]);
        let col_sum = |sheet: &Sheet, max_row: u32| -> f64 {
            sheet
                .cells()
                .filter(|c| c.col == 6 && c.row >= 2 && c.row <= max_row)
                .filter_map(|c| c.value.as_number())
                .sum()
        };
        let total = col_sum(&data_sheets[a], ra) + col_sum(&data_sheets[b], rb);
        let token = unique_token(&mut rng, "XFACT", &mut used_tokens);
        let row = first_free_row + i as u32;
        let sheet_name = names[last].to_string();
        data_sheets[last].set_value(1, row, CellValue::Text(token.clone()));
        data_sheets[last].set_value(2, row, CellValue::Text("consolidated total".into()));
        data_sheets[last].set_value(3, row, CellValue::Text("cross sheet summary".into()));
        data_sheets[last].set(6, row, CellValue::Number(total), Some(formula.clone()));
        plant_id += 1;
        let gold_answer = format!("{sheet_name}!A{row}");
        let question =
            format!("What is the consolidated cross sheet summary amount total for {token}?");
        plants.push(PlantRecord {
            id: plant_id,
            kind: "cross-sheet".into(),
            token: token.clone(),
            question: question.clone(),
            gold_answer: gold_answer.clone(),
            sheet: sheet_name.clone(),
            gold_cells: vec![
                format!("{sheet_name}!A{row}"),
                format!("{sheet_name}!F{row}"),
            ],
            gold_unit_ids: vec![
                format!("{sheet_name}/row:{row}"),
                format!("{sheet_name}/col:A"),
            ],
        });
        questions.push(QuestionRow {
            question,
            reasoning_type: "cross-sheet",
            provenance: format!("{sheet_name}!F{row}, ={formula}"),
            answer: gold_answer,
        });
    }

    // Embedded chart images with captioned plant tokens. The caption leads
    // with the question's noun phrase so the image unit dominates both
    // ranked lists; the trend phrase itself is the answer and stays out of
    // the question.
    for img in 0..spec.n_images {
        let si = img % spec.n_data_sheets;
        let token = unique_token(&mut rng, "CHARTFACT", &mut used_tokens);
        let pattern = CHART_PATTERNS[rng.random_range(0..CHART_PATTERNS.len())];
        let caption = format!("{token} quarterly revenue by region chart, trend: {pattern}");
        let id = format!("Chart_{:03}", img + 1);
        let anchor_row = 2 + 2 * (img / spec.n_data_sheets) as u32;
        let png = render_chart_png(&mut rng);
        let sheet_name = names[si].to_string();
        data_sheets[si].images.push(ImageAsset {
            id: id.clone(),
            bytes: png,
            media_type: "image/png".into(),
            anchor: Some(CellAddress::new(&sheet_name, 8, anchor_row)),
            caption: Some(caption.clone()),
        });
        plant_id += 1;
        let question =
            format!("What trend does the quarterly revenue by region chart {token} show?");
        plants.push(PlantRecord {
            id: plant_id,
            kind: "image".into(),
            token: token.clone(),
            question: question.clone(),
            gold_answer: caption.clone(),
            sheet: sheet_name.clone(),
            gold_cells: Vec::new(),
            gold_unit_ids: vec![format!("{sheet_name}/img:{id}")],
        });
        questions.push(QuestionRow {
            question,
            reasoning_type: if img % 2 == 0 { "trend" } else { "image" },
            provenance: format!("Image ID: {id}"),
            answer: caption,
        });
    }

    // Questions sheet: one cross-sheet and one image question when
    // available, then lookups up to the question budget.
    let n_lookup = spec.n_plants;
    let mut selected: Vec<&QuestionRow> = Vec::new();
    if spec.n_cross_sheet_formulas > 0 {
        selected.push(&questions[n_lookup]);
    }
    if spec.n_images > 0 {
        selected.push(&questions[n_lookup + spec.n_cross_sheet_formulas]);
    }
    for q in questions.iter().take(n_lookup) {
        if selected.len() >= spec.n_questions {
            break;
        }
        selected.push(q);
    }

    let mut qsheet = Sheet::new("Questions");
    for (c, h) in ["Question", "ReasoningType", "Provenance", "Answer"]
        .iter()
        .enumerate()
    {
        qsheet.set_value(c as u32 + 1, 1, CellValue::Text((*h).to_string()));
    }
    for (i, q) in selected.iter().enumerate() {
        let r = i as u32 + 2;
        qsheet.set_value(1, r, CellValue::Text(q.question.clone()));
        qsheet.set_value(2, r, CellValue::Text(q.reasoning_type.to_string()));
        qsheet.set_value(3, r, CellValue::Text(q.provenance.clone()));
        qsheet.set_value(4, r, CellValue::Text(q.answer.clone()));
    }

    let mut metadata = Sheet::new("Metadata");
    let meta_rows = [
        ("Title", format!("Synthetic {} workbook", spec.tier)),
        ("Tier", spec.tier.to_string()),
        ("Seed", spec.seed.to_string()),
        ("DataSheets", spec.n_data_sheets.to_string()),
        ("Rows", spec.n_rows.to_string()),
        ("Images", spec.n_images.to_string()),
        ("CrossSheetFormulas", spec.n_cross_sheet_formulas.to_string()),
        ("Generator", "frtr bench generator".to_string()),
    ];
    for (r, (k, v)) in meta_rows.iter().enumerate() {
        metadata.set_value(1, r as u32 + 1, CellValue::Text((*k).to_string()));
        metadata.set_value(2, r as u32 + 1, CellValue::Text(v.clone()));
    }

    let mut sheets = vec![metadata];
    sheets.extend(data_sheets);
    sheets.push(qsheet);
    let wb = Workbook::new("generated", sheets).map_err(BenchError::Model)?;
    Ok((wb, plants))
}

/// Generate a benchmark workbook at `out_path` plus a `.plants.jsonl`
/// sidecar next to it.
pub fn generate_bench(spec: &GenSpec, out_path: &Path) -> Result<GeneratedBench, BenchError> {
    let (wb, plants) = build_bench_workbook(spec)?;
    write_workbook(&wb, out_path, &WriteOptions::default()).map_err(BenchError::Xlsx)?;

    let plant_map_path = sidecar_path(out_path);
    let mut file = std::fs::File::create(&plant_map_path).map_err(|e| BenchError::Io {
        path: plant_map_path.display().to_string(),
        source: e,
    })?;
    for record in &plants {
        let line = serde_json::to_string(record)
            .map_err(|e| BenchError::BadGenSpec(format!("plant serialization: {e}")))?;
        writeln!(file, "{line}").map_err(|e| BenchError::Io {
            path: plant_map_path.display().to_string(),
            source: e,
        })?;
    }
    Ok(GeneratedBench {
        workbook_path: out_path.to_path_buf(),
        plant_map_path,
    })
}

/// `<dir>/<stem>.plants.jsonl` next to the workbook.
pub fn sidecar_path(workbook: &Path) -> PathBuf {
    let stem = workbook
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("bench");
    workbook.with_file_name(format!("{stem}.plants.jsonl"))
}

/// Load a plant-map sidecar.
pub fn load_plant_map(path: &Path) -> Result<Vec<PlantRecord>, BenchError> {
    let text = std::fs::read_to_string(path).map_err(|e| BenchError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: PlantRecord = serde_json::from_str(line).map_err(|e| {
            BenchError::BadGenSpec(format!("plant map line {}: {e}", i + 1))
        })?;
        out.push(record);
    }
    Ok(out)
}

/// Minimal deterministic PNG encoder: truecolor 8-bit, filter 0 scanlines,
/// one zlib IDAT. Enough for synthetic chart images; never a general
/// encoder.
fn png_chunk(out: &mut Vec<u8>, kind: &[u8; 4], data: &[u8]) {
    out.extend_from_slice(&(data.len() as u32).to_be_bytes());
    out.extend_from_slice(kind);
    out.extend_from_slice(data);
    let mut h = crc32fast::Hasher::new();
    h.update(kind);
    h.update(data);
    out.extend_from_slice(&h.finalize().to_be_bytes());
}

pub fn encode_png(width: u32, height: u32, rgb: &[u8]) -> Vec<u8> {
    assert_eq!(rgb.len(), (width * height * 3) as usize);
    let mut out = Vec::new();
    out.extend_from_slice(&[0x89, b'P', b'N', b'G', 0x0d, 0x0a, 0x1a, 0x0a]);

    let mut ihdr = Vec::new();
    ihdr.extend_from_slice(&width.to_be_bytes());
    ihdr.extend_from_slice(&height.to_be_bytes());
    ihdr.extend_from_slice(&[8, 2, 0, 0, 0]); // 8-bit, truecolor
    png_chunk(&mut out, b"IHDR", &ihdr);

    let mut raw = Vec::with_capacity((height * (width * 3 + 1)) as usize);
    for y in 0..height {
        raw.push(0); // filter: none
        let start = (y * width * 3) as usize;
        raw.extend_from_slice(&rgb[start..start + (width * 3) as usize]);
    }
    let mut encoder =
        flate2::write::ZlibEncoder::new(Vec::new(), flate2::Compression::default());
    encoder.write_all(&raw).expect("in-memory write");
    let idat = encoder.finish().expect("in-memory finish");
    png_chunk(&mut out, b"IDAT", &idat);
    png_chunk(&mut out, b"IEND", &[]);
    out
}

/// A small bar-chart-looking PNG; bar heights come from the generator's rng
/// stream so the bytes are seed-deterministic.
fn render_chart_png(rng: &mut ChaCha8Rng) -> Vec<u8> {
    let (w, h) = (64u32, 48u32);
    let mut rgb = vec![0xf4u8; (w * h * 3) as usize];
    let bars = 8u32;
    let bar_w = w / bars;
    for bar in 0..bars {
        let bar_h = rng.random_range(4..h - 4);
        let color = [
            rng.random_range(20..200) as u8,
            rng.random_range(60..220) as u8,
            rng.random_range(100..240) as u8,
        ];
        for y in (h - bar_h)..h {
            for x in (bar * bar_w)..((bar + 1) * bar_w).saturating_sub(1) {
                let at = ((y * w + x) * 3) as usize;
                rgb[at..at + 3].copy_from_slice(&color);
            }
        }
    }
    encode_png(w, h, &rgb)
}
