//! Typing of raw cell text for numeric comparisons.
//!
//! Table cells are kept verbatim; this module only interprets them on demand.
//! Currency symbols, thousands separators and percent signs are ignored, and
//! `a–b` style spans become ranges.

use std::fmt;

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TypedValue {
    Number { value: f64 },
    /// Closed span, `lo <= hi`.
    Range { lo: f64, hi: f64 },
    /// Unbounded above, as in `90+`.
    OpenRange { lo: f64 },
    Text { text: String },
    Missing,
}

impl TypedValue {
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            TypedValue::Number { .. } | TypedValue::Range { .. } | TypedValue::OpenRange { .. }
        )
    }

    /// Key used when ranking cells: ranges by their upper bound, open ranges by
    /// their lower bound. An open range outranks a closed value with the same
    /// bound, so `90+` beats `70–90`.
    pub fn rank_key(&self) -> Option<(f64, bool)> {
        match *self {
            TypedValue::Number { value } => Some((value, false)),
            TypedValue::Range { hi, .. } => Some((hi, false)),
            TypedValue::OpenRange { lo } => Some((lo, true)),
            _ => None,
        }
    }
}

impl fmt::Display for TypedValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypedValue::Number { value } => write!(f, "{value}"),
            TypedValue::Range { lo, hi } => write!(f, "{lo}–{hi}"),
            TypedValue::OpenRange { lo } => write!(f, "{lo}+"),
            TypedValue::Text { text } => f.write_str(text),
            TypedValue::Missing => Ok(()),
        }
    }
}

const MISSING_MARKERS: &[&str] = &["", "-", "--", "—", "–", "n/a", "na", "null", "none"];
const STRIPPED: &[char] = &['$', '€', '£', '¥', '₹', ',', '%'];
// Longest first so that "--" wins over "-".
const RANGE_SEPARATORS: &[&str] = &["–", "—", "--", "-"];

/// Total interpretation of a raw cell string.
pub fn coerce_cell(raw: &str) -> TypedValue {
    let trimmed = raw.trim();
    if MISSING_MARKERS
        .iter()
        .any(|m| trimmed.eq_ignore_ascii_case(m))
    {
        return TypedValue::Missing;
    }
    let cleaned: String = trimmed
        .chars()
        .filter(|c| !STRIPPED.contains(c))
        .map(|c| if c == '−' { '-' } else { c })
        .collect();
    let cleaned = cleaned.trim();

    if let Some(value) = parse_number(cleaned, true) {
        return TypedValue::Number { value };
    }
    if let Some(head) = cleaned.strip_suffix('+') {
        if let Some(lo) = parse_number(head.trim_end(), true) {
            return TypedValue::OpenRange { lo };
        }
    }
    if let Some((lo, hi)) = parse_range(cleaned) {
        return TypedValue::Range { lo, hi };
    }
    TypedValue::Text {
        text: trimmed.to_string(),
    }
}

fn parse_range(s: &str) -> Option<(f64, f64)> {
    for sep in RANGE_SEPARATORS {
        // A hyphen in first position is the sign of the lower bound.
        let mut from = s.chars().next().map_or(0, char::len_utf8);
        while let Some(off) = s.get(from..).and_then(|rest| rest.find(sep)) {
            let at = from + off;
            let (left, right) = (&s[..at], &s[at + sep.len()..]);
            if let (Some(lo), Some(hi)) = (parse_number(left.trim(), true), parse_number(right.trim(), false)) {
                // "3-1" style scores and "2012-13" seasons are not ranges.
                return (lo <= hi).then_some((lo, hi));
            }
            from = at + sep.len();
        }
    }
    None
}

/// Plain decimal numeral with optional exponent. Rejects `inf`, `nan` and
/// anything that overflows.
pub(crate) fn parse_number(s: &str, signed: bool) -> Option<f64> {
    let body = match s.strip_prefix(['-', '+']) {
        Some(rest) if signed => rest,
        Some(_) => return None,
        None => s,
    };
    let mut digits = 0;
    let mut seen_dot = false;
    let mut chars = body.char_indices().peekable();
    while let Some(&(_, c)) = chars.peek() {
        match c {
            '0'..='9' => digits += 1,
            '.' if !seen_dot => seen_dot = true,
            _ => break,
        }
        chars.next();
    }
    if digits == 0 {
        return None;
    }
    if let Some(&(i, c)) = chars.peek() {
        if c != 'e' && c != 'E' {
            return None;
        }
        let exp = &body[i + 1..];
        let exp = exp.strip_prefix(['-', '+']).unwrap_or(exp);
        if exp.is_empty() || !exp.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
    }
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}
