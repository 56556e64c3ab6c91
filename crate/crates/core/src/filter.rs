//! WHERE-style filter conditions over noisy table cells.
//!
//! Grammar (keywords are case-insensitive, a leading `WHERE` and a trailing
//! `;` are optional, and a `SELECT ... WHERE` prefix is skipped):
//!
//! ```text
//! expr       := and ("OR" and)*
//! and        := not ("AND" not)*
//! not        := "NOT" not | "(" expr ")" | comparison
//! comparison := column op literal
//! column     := word+ | "quoted" | `quoted` | [quoted] | #index
//! op         := = | == | != | <> | < | <= | > | >= | ≤ | ≥ | ≠ | CONTAINS
//! literal    := 'text' | "text" | number | word+
//! ```
//!
//! [`FilterExpr`]'s `Display` is the canonical spelling: uppercase keywords,
//! single-quoted strings, spaces around operators, minimal parentheses.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::coerce::{coerce_cell, parse_number, TypedValue};
use crate::table::Table;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FilterError {
    #[error("empty filter expression")]
    Empty,
    #[error("syntax error at position {position}: expected {expected}, found {found}")]
    Syntax {
        position: usize,
        expected: String,
        found: String,
    },
    #[error("unknown operator `{op}` at position {position}")]
    UnknownOperator { position: usize, op: String },
    #[error("column `{column}` not found; available columns: {}", available.join(", "))]
    ColumnNotFound {
        column: String,
        available: Vec<String>,
    },
    #[error("no candidate row has a numeric value in column `{column}`")]
    NoNumericCandidates { column: String },
    #[error("no candidate rows")]
    EmptyRows,
    #[error("row {row} out of range (table has {n_rows} rows)")]
    RowOutOfRange { row: usize, n_rows: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum ColumnRef {
    Name(String),
    Index(usize),
}

impl From<&str> for ColumnRef {
    fn from(s: &str) -> Self {
        ColumnRef::Name(s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Contains,
}

impl CmpOp {
    fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Contains => "CONTAINS",
        }
    }

    fn is_ordering(self) -> bool {
        matches!(self, CmpOp::Lt | CmpOp::Le | CmpOp::Gt | CmpOp::Ge)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Literal {
    Text(String),
    Number(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum FilterExpr {
    Comparison {
        column: ColumnRef,
        op: CmpOp,
        value: Literal,
    },
    And(Box<FilterExpr>, Box<FilterExpr>),
    Or(Box<FilterExpr>, Box<FilterExpr>),
    Not(Box<FilterExpr>),
}

impl FilterExpr {
    pub fn cmp(column: impl Into<ColumnRef>, op: CmpOp, value: Literal) -> Self {
        FilterExpr::Comparison {
            column: column.into(),
            op,
            value,
        }
    }

    pub fn and(self, other: FilterExpr) -> Self {
        FilterExpr::And(Box::new(self), Box::new(other))
    }

    pub fn or(self, other: FilterExpr) -> Self {
        FilterExpr::Or(Box::new(self), Box::new(other))
    }

    pub fn negate(self) -> Self {
        FilterExpr::Not(Box::new(self))
    }

    /// Canonical form with the `WHERE` keyword, as stored in run reports.
    pub fn to_where_clause(&self) -> String {
        format!("WHERE {self}")
    }

    fn precedence(&self) -> u8 {
        match self {
            FilterExpr::Or(..) => 1,
            FilterExpr::And(..) => 2,
            FilterExpr::Not(..) => 3,
            FilterExpr::Comparison { .. } => 4,
        }
    }

    fn columns(&self, out: &mut Vec<ColumnRef>) {
        match self {
            FilterExpr::Comparison { column, .. } => out.push(column.clone()),
            FilterExpr::And(l, r) | FilterExpr::Or(l, r) => {
                l.columns(out);
                r.columns(out);
            }
            FilterExpr::Not(e) => e.columns(out),
        }
    }
}

const KEYWORDS: &[&str] = &["AND", "OR", "NOT", "WHERE", "SELECT", "CONTAINS"];
const FOREIGN_OPERATORS: &[&str] = &[
    "LIKE", "ILIKE", "IN", "BETWEEN", "IS", "GLOB", "REGEXP", "MATCH",
];

fn is_keyword(word: &str) -> bool {
    KEYWORDS
        .iter()
        .chain(FOREIGN_OPERATORS)
        .any(|k| k.eq_ignore_ascii_case(word))
}

fn is_bare_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !is_keyword(name)
}

impl fmt::Display for ColumnRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColumnRef::Index(i) => write!(f, "#{i}"),
            ColumnRef::Name(n) if is_bare_identifier(n) => f.write_str(n),
            ColumnRef::Name(n) => write!(f, "\"{}\"", n.replace('"', "\"\"")),
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Number(v) => write!(f, "{v}"),
            Literal::Text(s) => write!(f, "'{}'", s.replace('\'', "''")),
        }
    }
}

impl fmt::Display for FilterExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let child = |f: &mut fmt::Formatter<'_>, e: &FilterExpr, parens: bool| {
            if parens {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        };
        match self {
            FilterExpr::Comparison { column, op, value } => {
                write!(f, "{column} {} {value}", op.symbol())
            }
            FilterExpr::And(l, r) | FilterExpr::Or(l, r) => {
                let p = self.precedence();
                let kw = if matches!(self, FilterExpr::And(..)) {
                    "AND"
                } else {
                    "OR"
                };
                // Left-associative: only a right child of equal precedence needs parentheses.
                child(f, l, l.precedence() < p)?;
                write!(f, " {kw} ")?;
                child(f, r, r.precedence() <= p)
            }
            FilterExpr::Not(e) => {
                f.write_str("NOT ")?;
                child(f, e, e.precedence() < 3)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Quoted(String),
    Str(String),
    Num(f64, String),
    Index(usize),
    Op(CmpOp),
    BadOp(String),
    LParen,
    RParen,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Word(w) => format!("`{w}`"),
            Tok::Quoted(q) => format!("\"{q}\""),
            Tok::Str(s) => format!("'{s}'"),
            Tok::Num(_, src) => src.clone(),
            Tok::Index(i) => format!("#{i}"),
            Tok::Op(op) => format!("`{}`", op.symbol()),
            Tok::BadOp(s) => format!("`{s}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self, Tok::Word(w) if w.eq_ignore_ascii_case(kw))
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '.'
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, FilterError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let start = i;
        if c.is_whitespace() || c == ';' {
            i += 1;
            continue;
        }
        match c {
            '(' => {
                out.push((start, Tok::LParen));
                i += 1;
            }
            ')' => {
                out.push((start, Tok::RParen));
                i += 1;
            }
            '\'' | '"' | '`' | '[' => {
                let close = if c == '[' { ']' } else { c };
                let mut s = String::new();
                i += 1;
                loop {
                    match chars.get(i) {
                        None => {
                            return Err(FilterError::Syntax {
                                position: start,
                                expected: format!("closing {close}"),
                                found: "end of input".into(),
                            })
                        }
                        Some(&ch) if ch == close => {
                            // Doubled quote is an escaped quote.
                            if close != ']' && chars.get(i + 1) == Some(&close) {
                                s.push(close);
                                i += 2;
                            } else {
                                i += 1;
                                break;
                            }
                        }
                        Some(&ch) => {
                            s.push(ch);
                            i += 1;
                        }
                    }
                }
                out.push((start, if c == '\'' { Tok::Str(s) } else { Tok::Quoted(s) }));
            }
            '#' => {
                i += 1;
                let digits: String = chars[i..].iter().take_while(|c| c.is_ascii_digit()).collect();
                if digits.is_empty() {
                    return Err(FilterError::Syntax {
                        position: start,
                        expected: "column index after `#`".into(),
                        found: chars.get(i).map_or("end of input".into(), |c| format!("`{c}`")),
                    });
                }
                i += digits.len();
                let idx = digits.parse().map_err(|_| FilterError::Syntax {
                    position: start,
                    expected: "column index".into(),
                    found: digits.clone(),
                })?;
                out.push((start, Tok::Index(idx)));
            }
            '=' | '!' | '<' | '>' | '~' | '^' | '≤' | '≥' | '≠' => {
                let run: String = chars[i..]
                    .iter()
                    .take_while(|c| matches!(c, '=' | '!' | '<' | '>' | '~' | '^' | '≤' | '≥' | '≠'))
                    .collect();
                i += run.chars().count();
                let tok = match run.as_str() {
                    "=" | "==" => Tok::Op(CmpOp::Eq),
                    "!=" | "<>" | "≠" => Tok::Op(CmpOp::Ne),
                    "<" => Tok::Op(CmpOp::Lt),
                    "<=" | "≤" => Tok::Op(CmpOp::Le),
                    ">" => Tok::Op(CmpOp::Gt),
                    ">=" | "≥" => Tok::Op(CmpOp::Ge),
                    _ => Tok::BadOp(run),
                };
                out.push((start, tok));
            }
            _ if is_word_char(c) || (c == '-' && chars.get(i + 1).is_some_and(|n| n.is_ascii_digit() || *n == '.')) => {
                i += 1;
                while i < chars.len() && is_word_char(chars[i]) {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                match parse_number(&word, true) {
                    Some(v) => out.push((start, Tok::Num(v, word))),
                    None => out.push((start, Tok::Word(word))),
                }
            }
            _ => {
                return Err(FilterError::Syntax {
                    position: start,
                    expected: "column, operator or literal".into(),
                    found: format!("`{c}`"),
                })
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn position(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(p, _)| *p)
    }

    fn found(&self) -> String {
        self.peek().map_or_else(|| "end of input".to_string(), Tok::describe)
    }

    fn syntax(&self, expected: &str) -> FilterError {
        FilterError::Syntax {
            position: self.position(),
            expected: expected.to_string(),
            found: self.found(),
        }
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.peek().is_some_and(|t| t.is_kw(kw)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn or(&mut self) -> Result<FilterExpr, FilterError> {
        let mut left = self.and()?;
        while self.eat_kw("OR") {
            left = left.or(self.and()?);
        }
        Ok(left)
    }

    fn and(&mut self) -> Result<FilterExpr, FilterError> {
        let mut left = self.not()?;
        while self.eat_kw("AND") {
            left = left.and(self.not()?);
        }
        Ok(left)
    }

    fn not(&mut self) -> Result<FilterExpr, FilterError> {
        if self.eat_kw("NOT") {
            return Ok(self.not()?.negate());
        }
        if self.peek() == Some(&Tok::LParen) {
            self.pos += 1;
            let inner = self.or()?;
            if self.peek() != Some(&Tok::RParen) {
                return Err(self.syntax("`)`"));
            }
            self.pos += 1;
            return Ok(inner);
        }
        self.comparison()
    }

    fn comparison(&mut self) -> Result<FilterExpr, FilterError> {
        let column = match self.peek() {
            Some(Tok::Quoted(q)) => {
                let q = q.clone();
                self.pos += 1;
                ColumnRef::Name(q)
            }
            Some(Tok::Index(i)) => {
                let i = *i;
                self.pos += 1;
                ColumnRef::Index(i)
            }
            Some(Tok::Word(w)) if !is_keyword(w) => {
                let mut parts = Vec::new();
                while let Some(tok) = self.peek() {
                    match tok {
                        Tok::Word(w) if !is_keyword(w) => parts.push(w.clone()),
                        Tok::Num(_, src) if !parts.is_empty() => parts.push(src.clone()),
                        _ => break,
                    }
                    self.pos += 1;
                }
                ColumnRef::Name(parts.join(" "))
            }
            _ => return Err(self.syntax("column name")),
        };
        let op = match self.peek() {
            Some(Tok::Op(op)) => *op,
            Some(t) if t.is_kw("CONTAINS") => CmpOp::Contains,
            Some(Tok::BadOp(s)) => {
                return Err(FilterError::UnknownOperator {
                    position: self.position(),
                    op: s.clone(),
                })
            }
            Some(Tok::Word(w)) if FOREIGN_OPERATORS.iter().any(|k| k.eq_ignore_ascii_case(w)) => {
                return Err(FilterError::UnknownOperator {
                    position: self.position(),
                    op: w.to_uppercase(),
                })
            }
            _ => return Err(self.syntax("comparison operator")),
        };
        self.pos += 1;
        let value = match self.peek() {
            Some(Tok::Str(s)) | Some(Tok::Quoted(s)) => {
                let v = Literal::Text(s.clone());
                self.pos += 1;
                v
            }
            Some(Tok::Num(n, _)) => {
                let v = Literal::Number(*n);
                self.pos += 1;
                v
            }
            Some(Tok::Word(w)) if !is_keyword(w) => {
                let mut parts = Vec::new();
                while let Some(tok) = self.peek() {
                    match tok {
                        Tok::Word(w) if !is_keyword(w) => parts.push(w.clone()),
                        Tok::Num(_, src) => parts.push(src.clone()),
                        _ => break,
                    }
                    self.pos += 1;
                }
                Literal::Text(parts.join(" "))
            }
            _ => return Err(self.syntax("literal value")),
        };
        Ok(FilterExpr::Comparison { column, op, value })
    }
}

/// Replaces a leading `SELECT ... ` up to the first unquoted `WHERE` with
/// spaces, keeping char positions intact for error reporting.
fn blank_select_prefix(text: &str) -> Result<String, FilterError> {
    let chars: Vec<char> = text.chars().collect();
    let lead = chars.iter().take_while(|c| c.is_whitespace()).count();
    let is_word_at = |i: usize, w: &str| {
        let n = w.chars().count();
        i + n <= chars.len()
            && chars[i..i + n].iter().collect::<String>().eq_ignore_ascii_case(w)
            && (i == 0 || !is_word_char(chars[i - 1]))
            && chars.get(i + n).is_none_or(|c| !is_word_char(*c))
    };
    if !is_word_at(lead, "SELECT") {
        return Ok(text.to_string());
    }
    let mut quote = None;
    for i in lead..chars.len() {
        match (quote, chars[i]) {
            (Some(q), c) if c == q => quote = None,
            (Some(_), _) => {}
            (None, c @ ('\'' | '"' | '`')) => quote = Some(c),
            (None, _) if is_word_at(i, "WHERE") => {
                return Ok(std::iter::repeat_n(' ', i).chain(chars[i..].iter().copied()).collect());
            }
            _ => {}
        }
    }
    Err(FilterError::Syntax {
        position: chars.len(),
        expected: "WHERE clause".into(),
        found: "end of input".into(),
    })
}

/// Parses a filter condition.
pub fn parse_filter(text: &str) -> Result<FilterExpr, FilterError> {
    let text = blank_select_prefix(text)?;
    let toks = lex(&text)?;
    if toks.is_empty() {
        return Err(FilterError::Empty);
    }
    let mut parser = Parser {
        toks,
        pos: 0,
        end: text.chars().count(),
    };
    parser.eat_kw("WHERE");
    if parser.peek().is_none() {
        return Err(FilterError::Empty);
    }
    let expr = parser.or()?;
    if parser.peek().is_some() {
        return Err(parser.syntax("AND, OR or end of input"));
    }
    Ok(expr)
}

fn normalize_name(s: &str) -> String {
    s.split(|c: char| c.is_whitespace() || c == '_')
        .filter(|p| !p.is_empty())
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Resolves a column reference against `table`'s headers.
///
/// Names match case-insensitively; failing that, underscores and runs of
/// whitespace are treated alike, and finally a name may match the last
/// component of a flattened `a | b` header when that match is unique.
pub fn resolve_column(table: &Table, column: &ColumnRef) -> Result<usize, FilterError> {
    let not_found = |name: String| FilterError::ColumnNotFound {
        column: name,
        available: table.headers().to_vec(),
    };
    match column {
        ColumnRef::Index(i) if *i < table.n_cols() => Ok(*i),
        ColumnRef::Index(i) => Err(not_found(format!("#{i}"))),
        ColumnRef::Name(name) => {
            let wanted = name.trim();
            let headers = table.headers();
            if let Some(i) = headers.iter().position(|h| h.trim().eq_ignore_ascii_case(wanted)) {
                return Ok(i);
            }
            if let Some(i) = headers.iter().position(|h| h.trim().to_lowercase() == wanted.to_lowercase()) {
                return Ok(i);
            }
            let norm = normalize_name(wanted);
            if let Some(i) = headers.iter().position(|h| normalize_name(h) == norm) {
                return Ok(i);
            }
            let suffix: Vec<usize> = headers
                .iter()
                .enumerate()
                .filter(|(_, h)| {
                    h.rsplit('|')
                        .next()
                        .is_some_and(|last| normalize_name(last) == norm)
                })
                .map(|(i, _)| i)
                .collect();
            match suffix.as_slice() {
                [only] => Ok(*only),
                _ => Err(not_found(name.clone())),
            }
        }
    }
}

/// A comparison that could not be decided because the cell and literal have
/// incompatible types. The row simply does not match.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoercionMiss {
    pub row: usize,
    pub col: usize,
    pub raw: String,
    pub literal: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Evaluation {
    pub rows: BTreeSet<usize>,
    pub coercion_misses: Vec<CoercionMiss>,
}

/// Rows of `table` satisfying `expr`.
pub fn evaluate_filter(expr: &FilterExpr, table: &Table) -> Result<BTreeSet<usize>, FilterError> {
    evaluate_filter_detailed(expr, table).map(|e| e.rows)
}

/// Like [`evaluate_filter`], also reporting every coercion miss.
pub fn evaluate_filter_detailed(expr: &FilterExpr, table: &Table) -> Result<Evaluation, FilterError> {
    let mut refs = Vec::new();
    expr.columns(&mut refs);
    for r in &refs {
        resolve_column(table, r)?;
    }
    let mut eval = Evaluation::default();
    for row in 0..table.n_rows() {
        if eval_row(expr, table, row, &mut eval.coercion_misses)? {
            eval.rows.insert(row);
        }
    }
    for miss in &eval.coercion_misses {
        log::debug!(
            "coercion miss at ({}, {}): {:?} vs {}",
            miss.row,
            miss.col,
            miss.raw,
            miss.literal
        );
    }
    Ok(eval)
}

fn eval_row(
    expr: &FilterExpr,
    table: &Table,
    row: usize,
    misses: &mut Vec<CoercionMiss>,
) -> Result<bool, FilterError> {
    Ok(match expr {
        FilterExpr::And(l, r) => {
            // No short circuit, so that misses are reported on both sides.
            let a = eval_row(l, table, row, misses)?;
            let b = eval_row(r, table, row, misses)?;
            a && b
        }
        FilterExpr::Or(l, r) => {
            let a = eval_row(l, table, row, misses)?;
            let b = eval_row(r, table, row, misses)?;
            a || b
        }
        FilterExpr::Not(e) => !eval_row(e, table, row, misses)?,
        FilterExpr::Comparison { column, op, value } => {
            let col = resolve_column(table, column)?;
            let raw = &table.rows()[row][col];
            match compare(raw, *op, value) {
                Some(b) => b,
                None => {
                    misses.push(CoercionMiss {
                        row,
                        col,
                        raw: raw.clone(),
                        literal: value.to_string(),
                    });
                    false
                }
            }
        }
    })
}

fn normalize_text(s: &str) -> String {
    s.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

fn literal_value(lit: &Literal) -> TypedValue {
    match lit {
        Literal::Number(v) => TypedValue::Number { value: *v },
        Literal::Text(s) => coerce_cell(s),
    }
}

fn literal_text(lit: &Literal) -> String {
    match lit {
        Literal::Number(v) => v.to_string(),
        Literal::Text(s) => s.clone(),
    }
}

fn equals(cell: &TypedValue, lit: &TypedValue) -> Option<bool> {
    use TypedValue::*;
    Some(match (cell, lit) {
        (Number { value: a }, Number { value: b }) => a == b,
        (Range { lo, hi }, Number { value: n }) | (Number { value: n }, Range { lo, hi }) => {
            lo <= n && n <= hi
        }
        (OpenRange { lo }, Number { value: n }) | (Number { value: n }, OpenRange { lo }) => n >= lo,
        (Range { lo: a, hi: b }, Range { lo: c, hi: d }) => a == c && b == d,
        (OpenRange { lo: a }, OpenRange { lo: b }) => a == b,
        (Range { .. }, OpenRange { .. }) | (OpenRange { .. }, Range { .. }) => false,
        _ => return None,
    })
}

/// `None` when the comparison is undecidable for the value types involved.
fn compare(raw: &str, op: CmpOp, lit: &Literal) -> Option<bool> {
    let text_cmp = || normalize_text(raw).cmp(&normalize_text(&literal_text(lit)));
    match op {
        CmpOp::Contains => Some(
            raw.trim()
                .to_lowercase()
                .contains(&literal_text(lit).trim().to_lowercase()),
        ),
        CmpOp::Eq | CmpOp::Ne => {
            let cell = coerce_cell(raw);
            let value = literal_value(lit);
            let eq = equals(&cell, &value).unwrap_or_else(|| text_cmp().is_eq());
            Some(if op == CmpOp::Eq { eq } else { !eq })
        }
        _ => {
            debug_assert!(op.is_ordering());
            let cell = coerce_cell(raw);
            let value = literal_value(lit);
            match (&cell, &value) {
                (TypedValue::Text { .. }, TypedValue::Text { .. }) => {
                    let ord = text_cmp();
                    Some(match op {
                        CmpOp::Lt => ord.is_lt(),
                        CmpOp::Le => ord.is_le(),
                        CmpOp::Gt => ord.is_gt(),
                        _ => ord.is_ge(),
                    })
                }
                (_, TypedValue::Number { value: n }) => ordered(&cell, op, *n),
                _ => None,
            }
        }
    }
}

/// Ordering against a number. A span satisfies the predicate only if all of
/// it does: upper bound for `<`/`<=`, lower bound for `>`/`>=`.
fn ordered(cell: &TypedValue, op: CmpOp, n: f64) -> Option<bool> {
    let (lower, upper) = match *cell {
        TypedValue::Number { value } => (value, Some(value)),
        TypedValue::Range { lo, hi } => (lo, Some(hi)),
        TypedValue::OpenRange { lo } => (lo, None),
        _ => return None,
    };
    Some(match op {
        CmpOp::Lt => upper.is_some_and(|u| u < n),
        CmpOp::Le => upper.is_some_and(|u| u <= n),
        CmpOp::Gt => lower > n,
        CmpOp::Ge => lower >= n,
        _ => unreachable!("not an ordering operator"),
    })
}

/// Rows among `rows` holding the largest value in `column`, ties included.
pub fn argmax_rows(
    table: &Table,
    rows: &BTreeSet<usize>,
    column: &ColumnRef,
) -> Result<BTreeSet<usize>, FilterError> {
    if rows.is_empty() {
        return Err(FilterError::EmptyRows);
    }
    let col = resolve_column(table, column)?;
    let mut best: Option<(f64, bool)> = None;
    let mut winners = BTreeSet::new();
    for &row in rows {
        let raw = table.row(row).ok_or(FilterError::RowOutOfRange {
            row,
            n_rows: table.n_rows(),
        })?;
        let Some(key) = coerce_cell(&raw[col]).rank_key() else {
            continue;
        };
        match best {
            Some(b) if key < b => {}
            Some(b) if key == b => {
                winners.insert(row);
            }
            _ => {
                best = Some(key);
                winners.clear();
                winners.insert(row);
            }
        }
    }
    if winners.is_empty() {
        return Err(FilterError::NoNumericCandidates {
            column: column.to_string(),
        });
    }
    Ok(winners)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn energy() -> Table {
        Table::from_strs(
            &["Source", "Cost", "Efficiency", "Scalability"],
            &[
                &["Solar Power", "30–50", "15–20", "4"],
                &["Wind Power", "20–40", "30–45", "5"],
                &["Hydropower", "40–70", "70–90", "3"],
                &["Geothermal", "50–80", "90+", "2"],
            ],
        )
        .unwrap()
    }

    fn rows(xs: &[usize]) -> BTreeSet<usize> {
        xs.iter().copied().collect()
    }

    fn text(s: &str) -> Literal {
        Literal::Text(s.into())
    }

    #[test]
    fn parses_where_equality() {
        assert_eq!(
            parse_filter("WHERE Event_Name = 'Aerospace'").unwrap(),
            FilterExpr::cmp("Event_Name", CmpOp::Eq, text("Aerospace"))
        );
    }

    #[test]
    fn parses_conjunction() {
        assert_eq!(
            parse_filter("Cost <= 50 AND Scalability >= 3").unwrap(),
            FilterExpr::cmp("Cost", CmpOp::Le, Literal::Number(50.0))
                .and(FilterExpr::cmp("Scalability", CmpOp::Ge, Literal::Number(3.0)))
        );
    }

    #[test]
    fn not_binds_tighter_than_or() {
        assert_eq!(
            parse_filter("NOT a = 1 OR b = 2").unwrap(),
            FilterExpr::cmp("a", CmpOp::Eq, Literal::Number(1.0))
                .negate()
                .or(FilterExpr::cmp("b", CmpOp::Eq, Literal::Number(2.0)))
        );
        assert_eq!(
            parse_filter("a = 1 OR b = 2 AND c = 3").unwrap(),
            FilterExpr::cmp("a", CmpOp::Eq, Literal::Number(1.0)).or(FilterExpr::cmp(
                "b",
                CmpOp::Eq,
                Literal::Number(2.0)
            )
            .and(FilterExpr::cmp("c", CmpOp::Eq, Literal::Number(3.0))))
        );
    }

    #[test]
    fn parentheses_override_precedence() {
        let e = parse_filter("(a = 1 OR b = 2) AND c = 3").unwrap();
        assert!(matches!(e, FilterExpr::And(..)));
        assert_eq!(e.to_string(), "(a = 1 OR b = 2) AND c = 3");
    }

    #[test]
    fn lenient_forms() {
        let e = parse_filter("SELECT * FROM t WHERE \"Event Name\" == Aerospace;").unwrap();
        assert_eq!(e, FilterExpr::cmp("Event Name", CmpOp::Eq, text("Aerospace")));
        let e = parse_filter("where Event Name <> 'x'").unwrap();
        assert_eq!(e, FilterExpr::cmp("Event Name", CmpOp::Ne, text("x")));
        let e = parse_filter("#2 ≥ -1.5").unwrap();
        assert_eq!(e, FilterExpr::cmp(ColumnRef::Index(2), CmpOp::Ge, Literal::Number(-1.5)));
        let e = parse_filter("[Film Title] contains 'love'").unwrap();
        assert_eq!(e, FilterExpr::cmp("Film Title", CmpOp::Contains, text("love")));
        let e = parse_filter("Name = 'O''Brien'").unwrap();
        assert_eq!(e, FilterExpr::cmp("Name", CmpOp::Eq, text("O'Brien")));
    }

    #[test]
    fn syntax_errors_carry_position() {
        match parse_filter("Cost <= ") {
            Err(FilterError::Syntax { position, expected, .. }) => {
                assert_eq!(position, 8);
                assert_eq!(expected, "literal value");
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_filter("(a = 1"),
            Err(FilterError::Syntax { .. })
        ));
        assert!(matches!(parse_filter("a = 'open"), Err(FilterError::Syntax { .. })));
        assert!(matches!(parse_filter("a = 1 b = 2"), Err(FilterError::Syntax { .. })));
        assert_eq!(parse_filter("   "), Err(FilterError::Empty));
        assert_eq!(parse_filter("WHERE"), Err(FilterError::Empty));
    }

    #[test]
    fn unknown_operators() {
        assert_eq!(
            parse_filter("Cost => 50"),
            Err(FilterError::UnknownOperator {
                position: 5,
                op: "=>".into()
            })
        );
        assert!(matches!(
            parse_filter("Name LIKE '%x%'"),
            Err(FilterError::UnknownOperator { op, .. }) if op == "LIKE"
        ));
    }

    #[test]
    fn cost_filter_uses_upper_bound() {
        let t = energy();
        let e = parse_filter("Cost <= 50").unwrap();
        assert_eq!(evaluate_filter(&e, &t).unwrap(), rows(&[0, 1]));
        let e = parse_filter("Cost <= 50 AND Scalability >= 3").unwrap();
        assert_eq!(evaluate_filter(&e, &t).unwrap(), rows(&[0, 1]));
        let e = parse_filter("Scalability >= 0").unwrap();
        assert_eq!(evaluate_filter(&e, &t).unwrap(), t.all_rows());
    }

    #[test]
    fn lower_bound_and_open_ranges() {
        let t = energy();
        let e = parse_filter("Efficiency >= 70").unwrap();
        assert_eq!(evaluate_filter(&e, &t).unwrap(), rows(&[2, 3]));
        let e = parse_filter("Efficiency < 100").unwrap();
        assert_eq!(evaluate_filter(&e, &t).unwrap(), rows(&[0, 1, 2]));
        let e = parse_filter("Efficiency = 40").unwrap();
        assert_eq!(evaluate_filter(&e, &t).unwrap(), rows(&[1]));
        let e = parse_filter("Efficiency = 95").unwrap();
        assert_eq!(evaluate_filter(&e, &t).unwrap(), rows(&[3]));
    }

    #[test]
    fn text_comparisons_are_case_insensitive() {
        let t = energy();
        let e = parse_filter("source = '  wind power'").unwrap();
        assert_eq!(evaluate_filter(&e, &t).unwrap(), rows(&[1]));
        let e = parse_filter("Source CONTAINS 'POWER'").unwrap();
        assert_eq!(evaluate_filter(&e, &t).unwrap(), rows(&[0, 1, 2]));
        let e = parse_filter("Source != 'Hydropower'").unwrap();
        assert_eq!(evaluate_filter(&e, &t).unwrap(), rows(&[0, 1, 3]));
    }

    #[test]
    fn text_vs_number_ordering_is_a_miss() {
        let t = energy();
        let e = parse_filter("Source > 3").unwrap();
        let eval = evaluate_filter_detailed(&e, &t).unwrap();
        assert!(eval.rows.is_empty());
        assert_eq!(eval.coercion_misses.len(), 4);
        let e = parse_filter("NOT Source > 3").unwrap();
        assert_eq!(evaluate_filter(&e, &t).unwrap(), t.all_rows());
    }

    #[test]
    fn unresolved_column_lists_headers() {
        let t = energy();
        let e = parse_filter("Price <= 3").unwrap();
        match evaluate_filter(&e, &t) {
            Err(FilterError::ColumnNotFound { column, available }) => {
                assert_eq!(column, "Price");
                assert_eq!(available.len(), 4);
            }
            other => panic!("{other:?}"),
        }
        let e = parse_filter("#7 = 1").unwrap();
        assert!(evaluate_filter(&e, &t).is_err());
    }

    #[test]
    fn column_resolution_variants() {
        let t = Table::from_strs(&["Event Name", "Cost | USD"], &[&["a", "1"]]).unwrap();
        assert_eq!(resolve_column(&t, &"event_name".into()), Ok(0));
        assert_eq!(resolve_column(&t, &"EVENT   NAME".into()), Ok(0));
        assert_eq!(resolve_column(&t, &"usd".into()), Ok(1));
        assert_eq!(resolve_column(&t, &ColumnRef::Index(1)), Ok(1));
    }

    #[test]
    fn argmax_efficiency_picks_wind() {
        let t = energy();
        let best = argmax_rows(&t, &rows(&[0, 1]), &"Efficiency".into()).unwrap();
        assert_eq!(best, rows(&[1]));
        assert_eq!(argmax_rows(&t, &rows(&[2]), &"Efficiency".into()).unwrap(), rows(&[2]));
        assert_eq!(
            argmax_rows(&t, &t.all_rows(), &"Efficiency".into()).unwrap(),
            rows(&[3])
        );
    }

    #[test]
    fn argmax_ties_and_errors() {
        let t = Table::from_strs(&["k", "v"], &[&["a", "7"], &["b", "7"], &["c", "n/a"]]).unwrap();
        assert_eq!(argmax_rows(&t, &t.all_rows(), &"v".into()).unwrap(), rows(&[0, 1]));
        assert!(matches!(
            argmax_rows(&t, &rows(&[0]), &"k".into()),
            Err(FilterError::NoNumericCandidates { .. })
        ));
        assert_eq!(argmax_rows(&t, &rows(&[]), &"v".into()), Err(FilterError::EmptyRows));
    }

    #[test]
    fn canonical_printing() {
        let e = FilterExpr::cmp("Event_Name", CmpOp::Eq, text("Aerospace"));
        assert_eq!(e.to_where_clause(), "WHERE Event_Name = 'Aerospace'");
        let e = FilterExpr::cmp("a", CmpOp::Eq, Literal::Number(1.0))
            .or(FilterExpr::cmp("b", CmpOp::Eq, Literal::Number(2.0)).or(FilterExpr::cmp(
                "c",
                CmpOp::Eq,
                Literal::Number(3.0),
            )));
        assert_eq!(e.to_string(), "a = 1 OR (b = 2 OR c = 3)");
        let e = FilterExpr::cmp("Start Time", CmpOp::Contains, text("it's"))
            .and(FilterExpr::cmp("and", CmpOp::Ne, Literal::Number(-0.5)))
            .negate();
        assert_eq!(e.to_string(), "NOT (\"Start Time\" CONTAINS 'it''s' AND \"and\" != -0.5)");
        assert_eq!(parse_filter(&e.to_string()).unwrap(), e);
    }
}
