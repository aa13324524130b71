//! A1-notation cell addressing: parsing, rendering, and range references.
//!
//! Column ordinals are 1-based (`1 -> "A"`, `26 -> "Z"`, `27 -> "AA"`) and the
//! letter encoding is bijective base-26, so `parse` and `render` round-trip
//! exactly. Sheet prefixes follow spreadsheet syntax: `Sheet1!B5`, with single
//! quotes around names containing spaces or punctuation (`'FY 2024'!B5`).

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AddrError {
    #[error("empty cell reference")]
    Empty,
    #[error("invalid column letters {0:?}")]
    BadColumn(String),
    #[error("invalid row number {0:?}")]
    BadRow(String),
    #[error("malformed cell reference {0:?}")]
    Malformed(String),
    #[error("unterminated quoted sheet name in {0:?}")]
    UnterminatedQuote(String),
    #[error("reference {0:?} has no sheet and no context sheet was given")]
    MissingSheet(String),
    #[error("malformed range {0:?}")]
    BadRange(String),
}

/// Fully resolved cell address: sheet plus 1-based column/row ordinals.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CellAddress {
    pub sheet: String,
    pub col: u32,
    pub row: u32,
}

impl CellAddress {
    pub fn new(sheet: impl Into<String>, col: u32, row: u32) -> Self {
        let sheet = sheet.into();
        debug_assert!(col >= 1 && row >= 1 && !sheet.is_empty());
        Self { sheet, col, row }
    }
}

impl std::fmt::Display for CellAddress {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&render_a1(self, true))
    }
}

/// A cell reference as written in a formula or provenance string; the sheet
/// part is optional until resolved against a context sheet.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CellRef {
    pub sheet: Option<String>,
    pub col: u32,
    pub row: u32,
}

impl CellRef {
    pub fn resolve(&self, context_sheet: &str) -> CellAddress {
        CellAddress {
            sheet: self
                .sheet
                .clone()
                .unwrap_or_else(|| context_sheet.to_string()),
            col: self.col,
            row: self.row,
        }
    }
}

/// A rectangular range reference. `rows: None` means a whole-column range
/// (`D:D`), evaluated over whatever rows the target sheet actually uses.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RangeRef {
    pub sheet: Option<String>,
    pub start_col: u32,
    pub end_col: u32,
    /// Inclusive (start_row, end_row); `None` for whole-column ranges.
    pub rows: Option<(u32, u32)>,
}

/// Render a 1-based column ordinal as letters: 1 -> "A", 27 -> "AA".
pub fn col_letters(mut col: u32) -> String {
    debug_assert!(col >= 1);
    let mut out = Vec::new();
    while col > 0 {
        let rem = ((col - 1) % 26) as u8;
        out.push(b'A' + rem);
        col = (col - 1) / 26;
    }
    out.reverse();
    String::from_utf8(out).expect("ascii")
}

/// Parse column letters into a 1-based ordinal: "A" -> 1, "AA" -> 27.
/// Case-insensitive.
pub fn letters_to_col(letters: &str) -> Result<u32, AddrError> {
    if letters.is_empty() {
        return Err(AddrError::BadColumn(letters.to_string()));
    }
    let mut col: u32 = 0;
    for ch in letters.chars() {
        let up = ch.to_ascii_uppercase();
        if !up.is_ascii_uppercase() {
            return Err(AddrError::BadColumn(letters.to_string()));
        }
        col = col
            .checked_mul(26)
            .and_then(|c| c.checked_add((up as u32) - ('A' as u32) + 1))
            .ok_or_else(|| AddrError::BadColumn(letters.to_string()))?;
    }
    Ok(col)
}

/// Split an optional `Sheet!` prefix off a reference, handling quoted names
/// (`'My Sheet'!B5`, with `''` as an escaped quote). Returns (sheet, rest).
pub fn split_sheet(text: &str) -> Result<(Option<String>, &str), AddrError> {
    if let Some(rest) = text.strip_prefix('\'') {
        // Quoted sheet name: scan for the closing quote, honoring '' escapes.
        let mut name = String::new();
        let mut chars = rest.char_indices().peekable();
        while let Some((i, ch)) = chars.next() {
            if ch == '\'' {
                if matches!(chars.peek(), Some((_, '\''))) {
                    name.push('\'');
                    chars.next();
                    continue;
                }
                let after = &rest[i + 1..];
                let tail = after
                    .strip_prefix('!')
                    .ok_or_else(|| AddrError::Malformed(text.to_string()))?;
                if name.is_empty() {
                    return Err(AddrError::Malformed(text.to_string()));
                }
                return Ok((Some(name), tail));
            }
            name.push(ch);
        }
        Err(AddrError::UnterminatedQuote(text.to_string()))
    } else if let Some(bang) = text.find('!') {
        let (sheet, tail) = text.split_at(bang);
        if sheet.is_empty() {
            return Err(AddrError::Malformed(text.to_string()));
        }
        Ok((Some(sheet.to_string()), &tail[1..]))
    } else {
        Ok((None, text))
    }
}

/// Parse the bare `LETTERS DIGITS` part of a reference ("B5" -> (2, 5)).
pub fn parse_bare_cell(text: &str) -> Result<(u32, u32), AddrError> {
    if text.is_empty() {
        return Err(AddrError::Empty);
    }
    let split = text
        .char_indices()
        .find(|(_, c)| c.is_ascii_digit())
        .map(|(i, _)| i)
        .ok_or_else(|| AddrError::Malformed(text.to_string()))?;
    let (letters, digits) = text.split_at(split);
    if letters.is_empty() {
        return Err(AddrError::Malformed(text.to_string()));
    }
    let col = letters_to_col(letters)?;
    let row: u32 = digits
        .parse()
        .map_err(|_| AddrError::BadRow(digits.to_string()))?;
    if row == 0 {
        return Err(AddrError::BadRow(digits.to_string()));
    }
    Ok((col, row))
}

/// Parse an A1 reference with an optional sheet prefix into a [`CellRef`].
pub fn parse_cell_ref(text: &str) -> Result<CellRef, AddrError> {
    let text = text.trim();
    if text.is_empty() {
        return Err(AddrError::Empty);
    }
    let (sheet, rest) = split_sheet(text)?;
    let (col, row) = parse_bare_cell(rest)?;
    Ok(CellRef { sheet, col, row })
}

/// Parse an A1 reference, resolving a missing sheet prefix from
/// `context_sheet`. Errors if both are absent.
pub fn parse_a1(text: &str, context_sheet: Option<&str>) -> Result<CellAddress, AddrError> {
    let cref = parse_cell_ref(text)?;
    match (cref.sheet, context_sheet) {
        (Some(sheet), _) => Ok(CellAddress {
            sheet,
            col: cref.col,
            row: cref.row,
        }),
        (None, Some(ctx)) => Ok(CellAddress {
            sheet: ctx.to_string(),
            col: cref.col,
            row: cref.row,
        }),
        (None, None) => Err(AddrError::MissingSheet(text.to_string())),
    }
}

fn sheet_needs_quotes(sheet: &str) -> bool {
    sheet.is_empty()
        || sheet
            .chars()
            .any(|c| !(c.is_alphanumeric() || c == '_' || c == '.'))
        || sheet.chars().next().is_some_and(|c| c.is_ascii_digit())
}

/// Render a sheet name with quoting when spreadsheet syntax requires it.
pub fn render_sheet_prefix(sheet: &str) -> String {
    if sheet_needs_quotes(sheet) {
        format!("'{}'!", sheet.replace('\'', "''"))
    } else {
        format!("{sheet}!")
    }
}

/// Render an address in A1 notation, optionally with its sheet prefix.
pub fn render_a1(addr: &CellAddress, with_sheet: bool) -> String {
    let cell = format!("{}{}", col_letters(addr.col), addr.row);
    if with_sheet {
        format!("{}{}", render_sheet_prefix(&addr.sheet), cell)
    } else {
        cell
    }
}

/// Parse a range reference: `B2:B100`, `Sheet1!B2:B100`, whole-column `D:D`
/// or `Sheet!D:F`. A single cell reference parses as a 1x1 range.
pub fn parse_range_ref(text: &str) -> Result<RangeRef, AddrError> {
    let text = text.trim();
    let (sheet, rest) = split_sheet(text)?;
    match rest.split_once(':') {
        None => {
            let (col, row) = parse_bare_cell(rest)?;
            Ok(RangeRef {
                sheet,
                start_col: col,
                end_col: col,
                rows: Some((row, row)),
            })
        }
        Some((a, b)) => {
            if a.is_empty() || b.is_empty() {
                return Err(AddrError::BadRange(text.to_string()));
            }
            let whole_col = !a.chars().any(|c| c.is_ascii_digit());
            if whole_col {
                let start = letters_to_col(a)?;
                let end = letters_to_col(b)?;
                if start > end {
                    return Err(AddrError::BadRange(text.to_string()));
                }
                Ok(RangeRef {
                    sheet,
                    start_col: start,
                    end_col: end,
                    rows: None,
                })
            } else {
                let (c1, r1) = parse_bare_cell(a)?;
                let (c2, r2) = parse_bare_cell(b)?;
                if c1 > c2 || r1 > r2 {
                    return Err(AddrError::BadRange(text.to_string()));
                }
                Ok(RangeRef {
                    sheet,
                    start_col: c1,
                    end_col: c2,
                    rows: Some((r1, r2)),
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn col_letter_fixpoints() {
        assert_eq!(col_letters(1), "A");
        assert_eq!(col_letters(26), "Z");
        assert_eq!(col_letters(27), "AA");
        assert_eq!(col_letters(702), "ZZ");
        assert_eq!(col_letters(703), "AAA");
        assert_eq!(letters_to_col("AA").unwrap(), 27);
        assert_eq!(letters_to_col("xfd").unwrap(), 16384);
    }

    #[test]
    fn parse_with_sheet() {
        let a = parse_a1("Sheet1!B5", None).unwrap();
        assert_eq!(a, CellAddress::new("Sheet1", 2, 5));
    }

    #[test]
    fn parse_with_context_sheet() {
        let a = parse_a1("AA10", Some("S")).unwrap();
        assert_eq!(a, CellAddress::new("S", 27, 10));
    }

    #[test]
    fn parse_consolidation_example() {
        let a = parse_a1("Consolidation!E47", None).unwrap();
        assert_eq!(a, CellAddress::new("Consolidation", 5, 47));
    }

    #[test]
    fn parse_quoted_sheet() {
        let a = parse_a1("'FY 2024'!C3", None).unwrap();
        assert_eq!(a, CellAddress::new("FY 2024", 3, 3));
        let b = parse_a1("'It''s'!A1", None).unwrap();
        assert_eq!(b.sheet, "It's");
    }

    #[test]
    fn render_examples() {
        assert_eq!(render_a1(&CellAddress::new("Sheet1", 2, 5), true), "Sheet1!B5");
        assert_eq!(render_a1(&CellAddress::new("S", 27, 10), false), "AA10");
        assert_eq!(
            render_a1(&CellAddress::new("EMEA_Sales", 4, 1), true),
            "EMEA_Sales!D1"
        );
        assert_eq!(
            render_a1(&CellAddress::new("FY 2024", 1, 1), true),
            "'FY 2024'!A1"
        );
    }

    #[test]
    fn errors_name_the_offending_token() {
        assert_eq!(
            parse_a1("5B", Some("S")).unwrap_err(),
            AddrError::Malformed("5B".to_string())
        );
        assert_eq!(
            parse_a1("B0", Some("S")).unwrap_err(),
            AddrError::BadRow("0".to_string())
        );
        assert_eq!(
            parse_a1("B5", None).unwrap_err(),
            AddrError::MissingSheet("B5".to_string())
        );
        assert!(matches!(
            parse_a1("'Oops!A1", None).unwrap_err(),
            AddrError::UnterminatedQuote(_)
        ));
    }

    #[test]
    fn range_forms() {
        let r = parse_range_ref("Sheet1!B2:B100").unwrap();
        assert_eq!(r.sheet.as_deref(), Some("Sheet1"));
        assert_eq!((r.start_col, r.end_col), (2, 2));
        assert_eq!(r.rows, Some((2, 100)));

        let c = parse_range_ref("D:D").unwrap();
        assert_eq!((c.start_col, c.end_col), (4, 4));
        assert_eq!(c.rows, None);

        let s = parse_range_ref("C5").unwrap();
        assert_eq!(s.rows, Some((5, 5)));

        assert!(parse_range_ref("B5:A1").is_err());
    }

    proptest! {
        // parse_a1 . render_a1 is the identity over the full spreadsheet grid.
        #[test]
        fn a1_round_trip(col in 1u32..=16384, row in 1u32..=1_048_576, with_sheet in any::<bool>()) {
            let addr = CellAddress::new("Book_1", col, row);
            let text = render_a1(&addr, with_sheet);
            let back = parse_a1(&text, Some("Book_1")).unwrap();
            prop_assert_eq!(back, addr);
        }

        #[test]
        fn letters_round_trip(col in 1u32..=100_000) {
            prop_assert_eq!(letters_to_col(&col_letters(col)).unwrap(), col);
        }
    }
}
