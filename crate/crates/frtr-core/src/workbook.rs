//! In-memory model of a parsed workbook: sheets, sparse cells, and embedded
//! image assets.
//!
//! Everything here is immutable after construction and safe to share across
//! threads. The cell map is sparse: a cell that is empty and carries no
//! formula is never stored, so memory tracks the non-empty cell count.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::addr::CellAddress;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("duplicate sheet name {0:?} (sheet names compare case-insensitively)")]
    DuplicateSheet(String),
    #[error("duplicate image id {0:?}")]
    DuplicateImageId(String),
    #[error("image {0:?} has an unsupported media type {1:?} (png and jpeg are accepted)")]
    UnsupportedMediaType(String, String),
    #[error("image {0:?} has no bytes")]
    EmptyImage(String),
}

/// Media types accepted for embedded images.
pub const IMAGE_MEDIA_TYPES: &[&str] = &["image/png", "image/jpeg"];

/// A typed scalar cell value. Dates are stored as spreadsheet serial numbers
/// (days since 1899-12-30) plus an optional display hint; no timezone
/// handling is applied anywhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CellValue {
    Empty,
    Number(f64),
    Text(String),
    Bool(bool),
    Date {
        serial: f64,
        display: Option<String>,
    },
}

impl CellValue {
    pub fn is_empty(&self) -> bool {
        matches!(self, CellValue::Empty)
    }

    /// Numeric view used by formula evaluation: numbers and date serials.
    pub fn as_number(&self) -> Option<f64> {
        match self {
            CellValue::Number(n) => Some(*n),
            CellValue::Date { serial, .. } => Some(*serial),
            _ => None,
        }
    }

    /// Render the raw stored value for serialization. Numbers use the
    /// shortest round-trip form ("100", not "100.0"); booleans render as
    /// TRUE/FALSE; dates prefer the display hint over the serial.
    pub fn render(&self) -> String {
        match self {
            CellValue::Empty => String::new(),
            CellValue::Number(n) => format!("{n}"),
            CellValue::Text(s) => s.clone(),
            CellValue::Bool(b) => if *b { "TRUE" } else { "FALSE" }.to_string(),
            CellValue::Date { serial, display } => display
                .clone()
                .unwrap_or_else(|| format!("{serial}")),
        }
    }
}

/// One stored cell. The coordinate is relative to the containing sheet;
/// a cell with a formula may still carry a cached value, and both are kept
/// independently. Formula text is verbatim, without the leading `=`, and is
/// never normalized at parse time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub col: u32,
    pub row: u32,
    pub value: CellValue,
    pub formula: Option<String>,
}

impl Cell {
    pub fn address(&self, sheet: &str) -> CellAddress {
        CellAddress::new(sheet, self.col, self.row)
    }
}

/// Tight bounding rectangle of a sheet's non-empty cells (all bounds
/// inclusive, 1-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsedRange {
    pub min_col: u32,
    pub min_row: u32,
    pub max_col: u32,
    pub max_row: u32,
}

impl UsedRange {
    pub fn n_rows(&self) -> u32 {
        self.max_row - self.min_row + 1
    }

    pub fn n_cols(&self) -> u32 {
        self.max_col - self.min_col + 1
    }

    /// Total cell slots inside the rectangle, empties included.
    pub fn n_cells(&self) -> u64 {
        u64::from(self.n_rows()) * u64::from(self.n_cols())
    }

    pub fn contains(&self, col: u32, row: u32) -> bool {
        col >= self.min_col && col <= self.max_col && row >= self.min_row && row <= self.max_row
    }
}

/// An embedded raster image with its anchor cell and caption, when the
/// source file provides them. Unanchored images are kept and indexed anyway.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageAsset {
    pub id: String,
    pub bytes: Vec<u8>,
    pub media_type: String,
    pub anchor: Option<CellAddress>,
    pub caption: Option<String>,
}

impl ImageAsset {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.bytes.is_empty() {
            return Err(ModelError::EmptyImage(self.id.clone()));
        }
        if !IMAGE_MEDIA_TYPES.contains(&self.media_type.as_str()) {
            return Err(ModelError::UnsupportedMediaType(
                self.id.clone(),
                self.media_type.clone(),
            ));
        }
        Ok(())
    }
}

/// One worksheet: a sparse cell map keyed `(row, col)` for row-major
/// iteration, plus embedded images. Merged regions are represented by their
/// top-left anchor cell only.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Sheet {
    pub name: String,
    cells: BTreeMap<(u32, u32), Cell>,
    pub images: Vec<ImageAsset>,
    used: Option<UsedRange>,
}

impl Sheet {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            cells: BTreeMap::new(),
            images: Vec::new(),
            used: None,
        }
    }

    /// Insert a cell. A value-less, formula-less cell is dropped so the
    /// sparse-map invariant holds.
    pub fn set(&mut self, col: u32, row: u32, value: CellValue, formula: Option<String>) {
        debug_assert!(col >= 1 && row >= 1);
        if value.is_empty() && formula.is_none() {
            self.cells.remove(&(row, col));
            return;
        }
        match &mut self.used {
            None => {
                self.used = Some(UsedRange {
                    min_col: col,
                    min_row: row,
                    max_col: col,
                    max_row: row,
                })
            }
            Some(u) => {
                u.min_col = u.min_col.min(col);
                u.min_row = u.min_row.min(row);
                u.max_col = u.max_col.max(col);
                u.max_row = u.max_row.max(row);
            }
        }
        self.cells.insert(
            (row, col),
            Cell {
                col,
                row,
                value,
                formula,
            },
        );
    }

    pub fn set_value(&mut self, col: u32, row: u32, value: CellValue) {
        self.set(col, row, value, None);
    }

    pub fn cell(&self, col: u32, row: u32) -> Option<&Cell> {
        self.cells.get(&(row, col))
    }

    /// `None` for a sheet with no stored cells.
    pub fn used_range(&self) -> Option<UsedRange> {
        self.used
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// All stored cells in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = &Cell> {
        self.cells.values()
    }

    /// Stored cells of one row, ascending by column.
    pub fn row(&self, row: u32) -> impl Iterator<Item = &Cell> {
        self.cells.range((row, u32::MIN)..=(row, u32::MAX)).map(|(_, c)| c)
    }

    /// Row numbers that hold at least one cell, ascending.
    pub fn occupied_rows(&self) -> Vec<u32> {
        let mut rows: Vec<u32> = Vec::new();
        for &(row, _) in self.cells.keys() {
            if rows.last() != Some(&row) {
                rows.push(row);
            }
        }
        rows
    }
}

/// A parsed workbook: ordered sheets with case-insensitively unique names.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Workbook {
    pub source_path: String,
    pub sheets: Vec<Sheet>,
}

impl Workbook {
    pub fn new(source_path: impl Into<String>, sheets: Vec<Sheet>) -> Result<Self, ModelError> {
        let mut seen = std::collections::HashSet::new();
        let mut image_ids = std::collections::HashSet::new();
        for sheet in &sheets {
            if !seen.insert(sheet.name.to_lowercase()) {
                return Err(ModelError::DuplicateSheet(sheet.name.clone()));
            }
            for asset in &sheet.images {
                asset.validate()?;
                if !image_ids.insert(asset.id.clone()) {
                    return Err(ModelError::DuplicateImageId(asset.id.clone()));
                }
            }
        }
        Ok(Self {
            source_path: source_path.into(),
            sheets,
        })
    }

    /// Case-insensitive sheet lookup, matching spreadsheet semantics.
    pub fn sheet(&self, name: &str) -> Option<&Sheet> {
        self.sheets
            .iter()
            .find(|s| s.name.eq_ignore_ascii_case(name) || s.name.to_lowercase() == name.to_lowercase())
    }

    pub fn n_cells(&self) -> usize {
        self.sheets.iter().map(Sheet::n_cells).sum()
    }

    pub fn images(&self) -> impl Iterator<Item = (&Sheet, &ImageAsset)> {
        self.sheets
            .iter()
            .flat_map(|s| s.images.iter().map(move |a| (s, a)))
    }
}
