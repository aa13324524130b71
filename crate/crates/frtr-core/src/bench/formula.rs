//! A small spreadsheet-formula evaluator used for answer equivalence
//! checking. It evaluates, it never mutates.
//!
//! Supported grammar: numeric literals, cell references, ranges (including
//! whole-column `D:D` and cross-sheet `Sheet2!C5:C50`), `+ - * /`, unary
//! minus, parentheses, and SUM / AVERAGE / COUNT / MIN / MAX.
//!
//! Conventions (shared with the independent test interpreter):
//! - Range cells contribute only numeric values (numbers and date serials);
//!   empty, text, and boolean cells are skipped.
//! - Scalar arguments contribute their numeric value to every function, and
//!   COUNT counts them.
//! - AVERAGE / MIN / MAX over zero numeric values is an error; SUM and
//!   COUNT return 0.
//! - A direct reference to an empty cell evaluates to 0; to a text or
//!   boolean cell, it is an error.
//! - References without a sheet prefix resolve against the workbook's first
//!   sheet.
//! - Explicit ranges are clamped to the sheet's used range (cells outside
//!   it do not exist).

use thiserror::Error;

use crate::addr::{letters_to_col, parse_bare_cell, RangeRef};
use crate::workbook::{Sheet, Workbook};

#[derive(Debug, Error, PartialEq)]
pub enum FormulaError {
    #[error("parse error at offset {pos}: {detail}")]
    Parse { pos: usize, detail: String },
    #[error("unsupported function {0:?}")]
    UnsupportedFunction(String),
    #[error("unknown sheet {0:?}")]
    UnknownSheet(String),
    #[error("cell {reference} holds a non-numeric value")]
    NonNumericCell { reference: String },
    #[error("division by zero")]
    DivideByZero,
    #[error("{0} has no numeric inputs")]
    EmptyArgs(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sum,
    Average,
    Count,
    Min,
    Max,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        match name.to_ascii_uppercase().as_str() {
            "SUM" => Some(Func::Sum),
            "AVERAGE" => Some(Func::Average),
            "COUNT" => Some(Func::Count),
            "MIN" => Some(Func::Min),
            "MAX" => Some(Func::Max),
            _ => None,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Func::Sum => "SUM",
            Func::Average => "AVERAGE",
            Func::Count => "COUNT",
            Func::Min => "MIN",
            Func::Max => "MAX",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Number(f64),
    Cell {
        sheet: Option<String>,
        col: u32,
        row: u32,
    },
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Call(Func, Vec<Arg>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Arg {
    Expr(Expr),
    Range(RangeRef),
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Number(f64),
    Ident(String),
    Quoted(String),
    LParen,
    RParen,
    Comma,
    Colon,
    Bang,
    Plus,
    Minus,
    Star,
    Slash,
}

fn lex(text: &str) -> Result<Vec<(usize, Token)>, FormulaError> {
    let mut out = Vec::new();
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\r' | '\n' => i += 1,
            '(' => {
                out.push((i, Token::LParen));
                i += 1;
            }
            ')' => {
                out.push((i, Token::RParen));
                i += 1;
            }
            ',' => {
                out.push((i, Token::Comma));
                i += 1;
            }
            ':' => {
                out.push((i, Token::Colon));
                i += 1;
            }
            '!' => {
                out.push((i, Token::Bang));
                i += 1;
            }
            '+' => {
                out.push((i, Token::Plus));
                i += 1;
            }
            '-' => {
                out.push((i, Token::Minus));
                i += 1;
            }
            '*' => {
                out.push((i, Token::Star));
                i += 1;
            }
            '/' => {
                out.push((i, Token::Slash));
                i += 1;
            }
            '\'' => {
                let start = i;
                i += 1;
                let mut name = String::new();
                loop {
                    if i >= bytes.len() {
                        return Err(FormulaError::Parse {
                            pos: start,
                            detail: "unterminated quoted sheet name".into(),
                        });
                    }
                    if bytes[i] as char == '\'' {
                        if i + 1 < bytes.len() && bytes[i + 1] as char == '\'' {
                            name.push('\'');
                            i += 2;
                            continue;
                        }
                        i += 1;
                        break;
                    }
                    name.push(bytes[i] as char);
                    i += 1;
                }
                out.push((start, Token::Quoted(name)));
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() && matches!(bytes[i] as char, '0'..='9' | '.') {
                    i += 1;
                }
                let s = &text[start..i];
                let n: f64 = s.parse().map_err(|_| FormulaError::Parse {
                    pos: start,
                    detail: format!("bad number {s:?}"),
                })?;
                out.push((start, Token::Number(n)));
            }
            c if c.is_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len()
                    && ((bytes[i] as char).is_alphanumeric()
                        || matches!(bytes[i] as char, '_' | '.'))
                {
                    i += 1;
                }
                out.push((start, Token::Ident(text[start..i].to_string())));
            }
            other => {
                return Err(FormulaError::Parse {
                    pos: i,
                    detail: format!("unexpected character {other:?}"),
                })
            }
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: &'a [(usize, Token)],
    pos: usize,
    text_len: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn peek2(&self) -> Option<&Token> {
        self.tokens.get(self.pos + 1).map(|(_, t)| t)
    }

    fn next(&mut self) -> Option<&Token> {
        let t = self.tokens.get(self.pos).map(|(_, t)| t);
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn offset(&self) -> usize {
        self.tokens
            .get(self.pos)
            .map(|(o, _)| *o)
            .unwrap_or(self.text_len)
    }

    fn err(&self, detail: impl Into<String>) -> FormulaError {
        FormulaError::Parse {
            pos: self.offset(),
            detail: detail.into(),
        }
    }

    fn expect(&mut self, want: &Token, what: &str) -> Result<(), FormulaError> {
        match self.peek() {
            Some(t) if t == want => {
                self.pos += 1;
                Ok(())
            }
            other => Err(self.err(format!("expected {what}, found {other:?}"))),
        }
    }

    fn expr(&mut self) -> Result<Expr, FormulaError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Token::Plus) => {
                    self.pos += 1;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(Token::Minus) => {
                    self.pos += 1;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, FormulaError> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Some(Token::Star) => {
                    self.pos += 1;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Some(Token::Slash) => {
                    self.pos += 1;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr, FormulaError> {
        match self.peek() {
            Some(Token::Number(n)) => {
                let n = *n;
                self.pos += 1;
                Ok(Expr::Number(n))
            }
            Some(Token::Minus) => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.factor()?)))
            }
            Some(Token::LParen) => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect(&Token::RParen, "closing parenthesis")?;
                Ok(inner)
            }
            Some(Token::Quoted(_)) => {
                let (sheet, col, row) = self.sheet_ref()?;
                Ok(Expr::Cell { sheet, col, row })
            }
            Some(Token::Ident(name)) => {
                let name = name.clone();
                if matches!(self.peek2(), Some(Token::LParen)) {
                    let func = Func::from_name(&name)
                        .ok_or(FormulaError::UnsupportedFunction(name))?;
                    self.pos += 2;
                    let args = self.arg_list()?;
                    self.expect(&Token::RParen, "closing parenthesis")?;
                    Ok(Expr::Call(func, args))
                } else {
                    let (sheet, col, row) = self.sheet_ref()?;
                    Ok(Expr::Cell { sheet, col, row })
                }
            }
            other => Err(self.err(format!("expected a value, found {other:?}"))),
        }
    }

    /// `[Sheet!]A1` — the sheet part may be an identifier or quoted.
    fn sheet_ref(&mut self) -> Result<(Option<String>, u32, u32), FormulaError> {
        let sheet = self.opt_sheet_prefix()?;
        let at = self.offset();
        match self.next() {
            Some(Token::Ident(cell)) => {
                let (col, row) = parse_bare_cell(cell).map_err(|e| FormulaError::Parse {
                    pos: at,
                    detail: e.to_string(),
                })?;
                Ok((sheet, col, row))
            }
            other => Err(FormulaError::Parse {
                pos: at,
                detail: format!("expected a cell reference, found {other:?}"),
            }),
        }
    }

    fn opt_sheet_prefix(&mut self) -> Result<Option<String>, FormulaError> {
        match (self.peek(), self.peek2()) {
            (Some(Token::Quoted(name)), Some(Token::Bang)) => {
                let name = name.clone();
                self.pos += 2;
                Ok(Some(name))
            }
            (Some(Token::Ident(name)), Some(Token::Bang)) => {
                let name = name.clone();
                self.pos += 2;
                Ok(Some(name))
            }
            _ => Ok(None),
        }
    }

    fn arg_list(&mut self) -> Result<Vec<Arg>, FormulaError> {
        let mut args = Vec::new();
        if matches!(self.peek(), Some(Token::RParen)) {
            return Ok(args);
        }
        loop {
            args.push(self.arg()?);
            match self.peek() {
                Some(Token::Comma) => {
                    self.pos += 1;
                }
                _ => return Ok(args),
            }
        }
    }

    /// One function argument: a range when the lookahead says so, otherwise
    /// an expression.
    fn arg(&mut self) -> Result<Arg, FormulaError> {
        let checkpoint = self.pos;
        match self.try_range() {
            Ok(Some(range)) => Ok(Arg::Range(range)),
            Ok(None) | Err(_) => {
                self.pos = checkpoint;
                Ok(Arg::Expr(self.expr()?))
            }
        }
    }

    fn try_range(&mut self) -> Result<Option<RangeRef>, FormulaError> {
        let sheet = self.opt_sheet_prefix()?;
        let first = match self.peek() {
            Some(Token::Ident(s)) => s.clone(),
            _ => return Ok(None),
        };
        if !matches!(self.peek2(), Some(Token::Colon)) {
            return Ok(None);
        }
        self.pos += 2;
        let at = self.offset();
        let second = match self.next() {
            Some(Token::Ident(s)) => s.clone(),
            other => {
                return Err(FormulaError::Parse {
                    pos: at,
                    detail: format!("expected range end, found {other:?}"),
                })
            }
        };
        let whole_col = !first.chars().any(|c| c.is_ascii_digit());
        let range = if whole_col {
            let start = letters_to_col(&first).map_err(|e| FormulaError::Parse {
                pos: at,
                detail: e.to_string(),
            })?;
            let end = letters_to_col(&second).map_err(|e| FormulaError::Parse {
                pos: at,
                detail: e.to_string(),
            })?;
            if start > end {
                return Err(FormulaError::Parse {
                    pos: at,
                    detail: format!("inverted column range {first}:{second}"),
                });
            }
            RangeRef {
                sheet,
                start_col: start,
                end_col: end,
                rows: None,
            }
        } else {
            let (c1, r1) = parse_bare_cell(&first).map_err(|e| FormulaError::Parse {
                pos: at,
                detail: e.to_string(),
            })?;
            let (c2, r2) = parse_bare_cell(&second).map_err(|e| FormulaError::Parse {
                pos: at,
                detail: e.to_string(),
            })?;
            if c1 > c2 || r1 > r2 {
                return Err(FormulaError::Parse {
                    pos: at,
                    detail: format!("inverted range {first}:{second}"),
                });
            }
            RangeRef {
                sheet,
                start_col: c1,
                end_col: c2,
                rows: Some((r1, r2)),
            }
        };
        Ok(Some(range))
    }
}

/// Parse formula text (leading `=` optional) into an AST.
pub fn parse_formula(text: &str) -> Result<Expr, FormulaError> {
    let text = text.trim().strip_prefix('=').unwrap_or(text.trim());
    let tokens = lex(text)?;
    if tokens.is_empty() {
        return Err(FormulaError::Parse {
            pos: 0,
            detail: "empty formula".into(),
        });
    }
    let mut parser = Parser {
        tokens: &tokens,
        pos: 0,
        text_len: text.len(),
    };
    let expr = parser.expr()?;
    if parser.pos != tokens.len() {
        return Err(parser.err("trailing tokens after expression"));
    }
    Ok(expr)
}

fn lookup_sheet<'a>(wb: &'a Workbook, sheet: &Option<String>) -> Result<&'a Sheet, FormulaError> {
    match sheet {
        Some(name) => wb
            .sheet(name)
            .ok_or_else(|| FormulaError::UnknownSheet(name.clone())),
        None => wb
            .sheets
            .first()
            .ok_or_else(|| FormulaError::UnknownSheet("(empty workbook)".into())),
    }
}

/// Numeric cell values inside a range, row-major; empty, text, and boolean
/// cells are skipped.
fn range_values(wb: &Workbook, range: &RangeRef) -> Result<Vec<f64>, FormulaError> {
    let sheet = lookup_sheet(wb, &range.sheet)?;
    let Some(used) = sheet.used_range() else {
        return Ok(Vec::new());
    };
    let (r1, r2) = match range.rows {
        Some((a, b)) => (a.max(used.min_row), b.min(used.max_row)),
        None => (used.min_row, used.max_row),
    };
    if r1 > r2 {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for row in r1..=r2 {
        for cell in sheet.row(row) {
            if cell.col < range.start_col || cell.col > range.end_col {
                continue;
            }
            if let Some(n) = cell.value.as_number() {
                out.push(n);
            }
        }
    }
    Ok(out)
}

fn eval_expr(expr: &Expr, wb: &Workbook) -> Result<f64, FormulaError> {
    match expr {
        Expr::Number(n) => Ok(*n),
        Expr::Cell { sheet, col, row } => {
            let s = lookup_sheet(wb, sheet)?;
            match s.cell(*col, *row) {
                None => Ok(0.0),
                Some(cell) => cell.value.as_number().ok_or_else(|| {
                    FormulaError::NonNumericCell {
                        reference: format!(
                            "{}!{}{}",
                            s.name,
                            crate::addr::col_letters(*col),
                            row
                        ),
                    }
                }),
            }
        }
        Expr::Neg(inner) => Ok(-eval_expr(inner, wb)?),
        Expr::Add(a, b) => Ok(eval_expr(a, wb)? + eval_expr(b, wb)?),
        Expr::Sub(a, b) => Ok(eval_expr(a, wb)? - eval_expr(b, wb)?),
        Expr::Mul(a, b) => Ok(eval_expr(a, wb)? * eval_expr(b, wb)?),
        Expr::Div(a, b) => {
            let denom = eval_expr(b, wb)?;
            if denom == 0.0 {
                return Err(FormulaError::DivideByZero);
            }
            Ok(eval_expr(a, wb)? / denom)
        }
        Expr::Call(func, args) => {
            let mut values = Vec::new();
            for arg in args {
                match arg {
                    Arg::Expr(e) => values.push(eval_expr(e, wb)?),
                    Arg::Range(r) => values.extend(range_values(wb, r)?),
                }
            }
            match func {
                Func::Sum => Ok(values.iter().sum()),
                Func::Count => Ok(values.len() as f64),
                Func::Average => {
                    if values.is_empty() {
                        return Err(FormulaError::EmptyArgs(func.name()));
                    }
                    Ok(values.iter().sum::<f64>() / values.len() as f64)
                }
                Func::Min | Func::Max => {
                    if values.is_empty() {
                        return Err(FormulaError::EmptyArgs(func.name()));
                    }
                    let mut best = values[0];
                    for &v in &values[1..] {
                        best = if *func == Func::Min { best.min(v) } else { best.max(v) };
                    }
                    Ok(best)
                }
            }
        }
    }
}

/// Evaluate formula text over a workbook. Unqualified references resolve
/// against the first sheet.
pub fn eval_formula(text: &str, wb: &Workbook) -> Result<f64, FormulaError> {
    eval_expr(&parse_formula(text)?, wb)
}

/// All ranges referenced by a formula (single cells become 1x1 ranges);
/// used for provenance alignment.
pub fn collect_refs(text: &str) -> Result<Vec<RangeRef>, FormulaError> {
    let mut out = Vec::new();
    fn walk_expr(e: &Expr, out: &mut Vec<RangeRef>) {
        match e {
            Expr::Number(_) => {}
            Expr::Cell { sheet, col, row } => out.push(RangeRef {
                sheet: sheet.clone(),
                start_col: *col,
                end_col: *col,
                rows: Some((*row, *row)),
            }),
            Expr::Neg(a) => walk_expr(a, out),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                walk_expr(a, out);
                walk_expr(b, out);
            }
            Expr::Call(_, args) => {
                for arg in args {
                    match arg {
                        Arg::Expr(e) => walk_expr(e, out),
                        Arg::Range(r) => out.push(r.clone()),
                    }
                }
            }
        }
    }
    walk_expr(&parse_formula(text)?, &mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workbook::{CellValue, Sheet};

    fn wb_one_sheet(cells: &[(u32, u32, f64)]) -> Workbook {
        let mut s = Sheet::new("Sheet1");
        for (col, row, v) in cells {
            s.set_value(*col, *row, CellValue::Number(*v));
        }
        Workbook::new("test", vec![s]).unwrap()
    }

    #[test]
    fn sum_over_range() {
        let wb = wb_one_sheet(&[(2, 2, 1.0), (2, 3, 2.0), (2, 4, 3.0)]);
        assert_eq!(eval_formula("SUM(B2:B4)", &wb), Ok(6.0));
        assert_eq!(eval_formula("=SUM(B2:B4)", &wb), Ok(6.0));
    }

    #[test]
    fn cross_sheet_sum() {
        let mut s1 = Sheet::new("Sheet1");
        s1.set_value(2, 2, CellValue::Number(1.0));
        s1.set_value(2, 3, CellValue::Number(2.0));
        let mut s2 = Sheet::new("Sheet2");
        s2.set_value(3, 5, CellValue::Number(4.0));
        let wb = Workbook::new("t", vec![s1, s2]).unwrap();
        assert_eq!(eval_formula("SUM(Sheet1!B2:B3, Sheet2!C5)", &wb), Ok(7.0));
    }

    #[test]
    fn average_of_empty_range_errors() {
        let wb = wb_one_sheet(&[(1, 1, 1.0)]);
        assert_eq!(
            eval_formula("AVERAGE(D10:D20)", &wb),
            Err(FormulaError::EmptyArgs("AVERAGE"))
        );
    }

    #[test]
    fn whole_column_uses_used_range() {
        let wb = wb_one_sheet(&[(4, 2, 10.0), (4, 5, 20.0), (1, 9, 99.0)]);
        assert_eq!(eval_formula("SUM(D:D)", &wb), Ok(30.0));
        assert_eq!(eval_formula("COUNT(D:D)", &wb), Ok(2.0));
    }

    #[test]
    fn ranges_skip_text_cells() {
        let mut s = Sheet::new("Sheet1");
        s.set_value(1, 1, CellValue::Text("header".into()));
        s.set_value(1, 2, CellValue::Number(5.0));
        s.set_value(1, 3, CellValue::Bool(true));
        s.set_value(1, 4, CellValue::Number(7.0));
        let wb = Workbook::new("t", vec![s]).unwrap();
        assert_eq!(eval_formula("SUM(A:A)", &wb), Ok(12.0));
        assert_eq!(eval_formula("COUNT(A1:A4)", &wb), Ok(2.0));
        assert_eq!(eval_formula("AVERAGE(A:A)", &wb), Ok(6.0));
    }

    #[test]
    fn arithmetic_and_precedence() {
        let wb = wb_one_sheet(&[(1, 1, 10.0)]);
        assert_eq!(eval_formula("2 + 3 * 4", &wb), Ok(14.0));
        assert_eq!(eval_formula("(2 + 3) * 4", &wb), Ok(20.0));
        assert_eq!(eval_formula("-A1 + 12", &wb), Ok(2.0));
        assert_eq!(eval_formula("A1 / 4", &wb), Ok(2.5));
    }

    #[test]
    fn division_by_zero() {
        let wb = wb_one_sheet(&[]);
        assert_eq!(eval_formula("1 / 0", &wb), Err(FormulaError::DivideByZero));
        // B1 is empty, so it evaluates to 0.
        assert_eq!(eval_formula("1 / B1", &wb), Err(FormulaError::DivideByZero));
    }

    #[test]
    fn unsupported_function_is_named() {
        let wb = wb_one_sheet(&[]);
        assert_eq!(
            eval_formula("VLOOKUP(A1, B:C, 2)", &wb),
            Err(FormulaError::UnsupportedFunction("VLOOKUP".into()))
        );
    }

    #[test]
    fn unknown_sheet_is_named() {
        let wb = wb_one_sheet(&[]);
        assert_eq!(
            eval_formula("SUM(Ghost!A1:A5)", &wb),
            Err(FormulaError::UnknownSheet("Ghost".into()))
        );
    }

    #[test]
    fn text_cell_in_direct_ref_errors() {
        let mut s = Sheet::new("Sheet1");
        s.set_value(1, 1, CellValue::Text("abc".into()));
        let wb = Workbook::new("t", vec![s]).unwrap();
        assert!(matches!(
            eval_formula("A1 + 1", &wb),
            Err(FormulaError::NonNumericCell { .. })
        ));
    }

    #[test]
    fn min_max_and_nested_calls() {
        let wb = wb_one_sheet(&[(1, 1, 3.0), (1, 2, 9.0), (1, 3, 5.0)]);
        assert_eq!(eval_formula("MIN(A1:A3)", &wb), Ok(3.0));
        assert_eq!(eval_formula("MAX(A1:A3)", &wb), Ok(9.0));
        assert_eq!(eval_formula("SUM(MIN(A1:A3), MAX(A1:A3))", &wb), Ok(12.0));
        assert_eq!(eval_formula("SUM(A1:A3, 10, -2)", &wb), Ok(25.0));
    }

    #[test]
    fn quoted_sheet_names() {
        let mut s = Sheet::new("FY 2024");
        s.set_value(1, 1, CellValue::Number(8.0));
        let wb = Workbook::new("t", vec![s]).unwrap();
        assert_eq!(eval_formula("'FY 2024'!A1 * 2", &wb), Ok(16.0));
        assert_eq!(eval_formula("SUM('FY 2024'!A1:A2)", &wb), Ok(8.0));
    }

    #[test]
    fn collect_refs_walks_everything() {
        let refs = collect_refs("=SUM(Sheet1!B2:B100, Sheet2!C5:C50) + D7").unwrap();
        assert_eq!(refs.len(), 3);
        assert_eq!(refs[0].sheet.as_deref(), Some("Sheet1"));
        assert_eq!(refs[1].sheet.as_deref(), Some("Sheet2"));
        assert_eq!(refs[2].rows, Some((7, 7)));
    }

    #[test]
    fn trailing_garbage_rejected() {
        assert!(matches!(
            parse_formula("1 + 2 extra"),
            Err(FormulaError::Parse { .. })
        ));
    }
}
