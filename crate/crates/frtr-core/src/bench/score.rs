//! Answer equivalence checking.
//!
//! A predicted answer counts as correct when any of three clauses fires,
//! tried in order:
//!
//! (a) numeric: both sides parse as numbers (after currency and
//!     thousands-separator stripping) and agree within relative 1e-6
//!     (absolute 1e-9 near zero);
//! (b) formula equivalence: both sides evaluate under the formula grammar
//!     over the workbook and the results agree within the same tolerance —
//!     cell references and bare numbers are valid formulas, so
//!     `Sheet1!B5` vs `12450` compares by value;
//! (c) string: normalized strings (trim, casefold, collapse whitespace,
//!     strip thousands separators and currency symbols) are equal.
//!
//! Unevaluable formulas simply fall through to clause (c).

use serde::{Deserialize, Serialize};

use super::formula::eval_formula;
use crate::workbook::Workbook;

/// Which clause decided a verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchedBy {
    Numeric,
    FormulaEquivalence,
    String,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Verdict {
    pub correct: bool,
    pub matched_by: MatchedBy,
}

const CURRENCY_SYMBOLS: [char; 4] = ['$', '€', '£', '¥'];

/// Normalize for clause (c): trim, casefold, collapse whitespace, strip
/// currency symbols and digit-adjacent thousands separators.
pub fn normalize_answer(text: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut stripped = String::with_capacity(chars.len());
    for (i, &c) in chars.iter().enumerate() {
        if CURRENCY_SYMBOLS.contains(&c) {
            continue;
        }
        if c == ',' {
            let prev_digit = i > 0 && chars[i - 1].is_ascii_digit();
            let next_digit = chars.get(i + 1).is_some_and(|n| n.is_ascii_digit());
            if prev_digit && next_digit {
                continue;
            }
        }
        stripped.push(c);
    }
    let lowered = stripped.to_lowercase();
    let mut out = String::with_capacity(lowered.len());
    let mut pending_space = false;
    for c in lowered.trim().chars() {
        if c.is_whitespace() {
            pending_space = true;
            continue;
        }
        if pending_space && !out.is_empty() {
            out.push(' ');
        }
        pending_space = false;
        out.push(c);
    }
    out
}

/// Lenient numeric parse over the normalized form.
pub fn parse_number(text: &str) -> Option<f64> {
    let normalized = normalize_answer(text);
    normalized.parse::<f64>().ok().filter(|n| n.is_finite())
}

/// Tolerance rule: relative 1e-6, absolute 1e-9 near zero.
pub fn numbers_match(a: f64, b: f64) -> bool {
    let scale = a.abs().max(b.abs());
    (a - b).abs() <= (1e-6 * scale).max(1e-9)
}

/// Check a predicted answer against the gold answer over `wb`.
pub fn check_answer(predicted: &str, gold: &str, wb: &Workbook) -> Verdict {
    // (a) numeric comparison.
    if let (Some(p), Some(g)) = (parse_number(predicted), parse_number(gold)) {
        if numbers_match(p, g) {
            return Verdict {
                correct: true,
                matched_by: MatchedBy::Numeric,
            };
        }
    }

    // (b) formula / reference evaluation.
    if let (Ok(p), Ok(g)) = (eval_formula(predicted, wb), eval_formula(gold, wb)) {
        if numbers_match(p, g) {
            return Verdict {
                correct: true,
                matched_by: MatchedBy::FormulaEquivalence,
            };
        }
    }

    // (c) normalized string equality.
    if normalize_answer(predicted) == normalize_answer(gold) {
        return Verdict {
            correct: true,
            matched_by: MatchedBy::String,
        };
    }

    Verdict {
        correct: false,
        matched_by: MatchedBy::None,
    }
}
