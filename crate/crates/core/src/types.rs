//! Benchmark instances and phrase-level alignments.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::table::{AttributionSet, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Dataset {
    ToTTo,
    FetaQA,
    AITQA,
    Other,
}

impl Dataset {
    pub const ALL: [Dataset; 4] = [Dataset::ToTTo, Dataset::FetaQA, Dataset::AITQA, Dataset::Other];

    pub fn as_str(self) -> &'static str {
        match self {
            Dataset::ToTTo => "ToTTo",
            Dataset::FetaQA => "FetaQA",
            Dataset::AITQA => "AITQA",
            Dataset::Other => "Other",
        }
    }
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Dataset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Dataset::ALL
            .into_iter()
            .find(|d| d.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown dataset `{s}` (expected ToTTo, FetaQA, AITQA or Other)"))
    }
}

/// Label provenance: human-annotated or carried over from the source dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Gold,
    Silver,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Gold => "gold",
            Split::Silver => "silver",
        })
    }
}

/// Which splits to load.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitFilter {
    Gold,
    Silver,
    #[default]
    All,
}

impl SplitFilter {
    pub fn admits(self, split: Split) -> bool {
        match self {
            SplitFilter::All => true,
            SplitFilter::Gold => split == Split::Gold,
            SplitFilter::Silver => split == Split::Silver,
        }
    }
}

impl FromStr for SplitFilter {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gold" => Ok(SplitFilter::Gold),
            "silver" => Ok(SplitFilter::Silver),
            "all" => Ok(SplitFilter::All),
            _ => Err(format!("unknown split `{s}` (expected gold, silver or all)")),
        }
    }
}

/// Character span of an answer substring. Offsets count Unicode scalar
/// values, not bytes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub text: String,
}

impl Span {
    /// Span of the first occurrence of `phrase` in `answer` at or after char
    /// offset `from`.
    pub fn locate(answer: &str, phrase: &str, from: usize) -> Option<Span> {
        if phrase.is_empty() {
            return None;
        }
        let byte_from = char_to_byte(answer, from)?;
        let at = answer[byte_from..].find(phrase)? + byte_from;
        let start = answer[..at].chars().count();
        let end = start + phrase.chars().count();
        Some(Span {
            start,
            end,
            text: phrase.to_string(),
        })
    }

    /// Checks `0 <= start < end <= len(answer)` and that `text` is the slice.
    pub fn check(&self, answer: &str) -> Result<(), String> {
        let len = answer.chars().count();
        if self.start >= self.end || self.end > len {
            return Err(format!(
                "span [{}, {}) invalid for answer of length {}",
                self.start, self.end, len
            ));
        }
        let slice: String = answer.chars().skip(self.start).take(self.end - self.start).collect();
        if slice != self.text {
            return Err(format!(
                "span text {:?} does not match answer slice {:?}",
                self.text, slice
            ));
        }
        Ok(())
    }
}

fn char_to_byte(s: &str, chars: usize) -> Option<usize> {
    if chars == 0 {
        return Some(0);
    }
    match s.char_indices().nth(chars) {
        Some((b, _)) => Some(b),
        None if s.chars().count() == chars => Some(s.len()),
        None => None,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PhraseAlignment {
    pub phrase: Span,
    pub cells: AttributionSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QAInstance {
    pub id: String,
    pub dataset: Dataset,
    pub split: Split,
    pub table: Table,
    pub question: String,
    pub answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<Vec<PhraseAlignment>>,
}

impl QAInstance {
    /// Union of all gold alignment cells, if labels exist.
    pub fn gold_cells(&self) -> Option<AttributionSet> {
        self.gold.as_ref().map(|g| {
            g.iter().fold(AttributionSet::new(), |mut acc, a| {
                acc.extend_from(&a.cells);
                acc
            })
        })
    }
}
