//! Reference-free attribution scoring by comparing atomic facts.
//!
//! Attributed cells and the answer are both turned into short declarative
//! facts. A support judge decides for every (cell fact, answer fact) pair
//! whether the cell fact backs the answer fact, giving
//!
//! * `a` / `b`: answer facts with / without any supporting cell fact,
//! * `c` / `d`: cell facts that support / support no answer fact,
//!
//! and `recall = a / (a + b)`, `precision = c / (c + d)`. An empty side
//! scores 1 and is flagged vacuous.

use std::collections::{BTreeMap, BTreeSet};

use cellattr_core::coerce::{coerce_cell, TypedValue};
use cellattr_core::metrics::PRScore;
use cellattr_core::table::{AttributionSet, CellRef, Table};
use cellattr_core::types::Dataset;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::context::{array, as_pair, as_text, field, render_metadata, AgentContext};
use crate::error::AgentError;
use crate::prompts;

pub const SUPPORT_BATCH: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FactOrigin {
    Cell,
    Answer,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fact {
    pub text: String,
    pub origin: FactOrigin,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<CellRef>,
    /// Raw cell value, for cell facts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
    /// The cell is empty; such facts take no part in alignment.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub missing: bool,
}

impl Fact {
    pub fn answer(text: impl Into<String>) -> Self {
        Fact {
            text: text.into(),
            origin: FactOrigin::Answer,
            source: None,
            value: None,
            missing: false,
        }
    }

    pub fn cell(text: impl Into<String>, source: CellRef, value: impl Into<String>) -> Self {
        let value = value.into();
        Fact {
            text: text.into(),
            origin: FactOrigin::Cell,
            source: Some(source),
            missing: matches!(coerce_cell(&value), TypedValue::Missing),
            value: Some(value),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactCounts {
    pub a: usize,
    pub b: usize,
    pub c: usize,
    pub d: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FairScore {
    pub precision: f64,
    pub recall: f64,
    pub precision_vacuous: bool,
    pub recall_vacuous: bool,
}

pub fn fairscore(counts: FactCounts) -> FairScore {
    let ratio = |hit: usize, miss: usize| match hit + miss {
        0 => (1.0, true),
        n => (hit as f64 / n as f64, false),
    };
    let (recall, recall_vacuous) = ratio(counts.a, counts.b);
    let (precision, precision_vacuous) = ratio(counts.c, counts.d);
    FairScore {
        precision,
        recall,
        precision_vacuous,
        recall_vacuous,
    }
}

/// First column whose values are all non-empty, distinct text; column 0 otherwise.
pub fn row_key_column(table: &Table) -> usize {
    (0..table.n_cols())
        .find(|&c| {
            let mut seen = BTreeSet::new();
            table.rows().iter().all(|row| {
                let v = row[c].trim();
                matches!(coerce_cell(v), TypedValue::Text { .. }) && seen.insert(v.to_lowercase())
            })
        })
        .unwrap_or(0)
}

fn header_label(table: &Table, col: usize) -> String {
    match table.header(col).map(str::trim) {
        Some(h) if !h.is_empty() => h.to_string(),
        _ => format!("column {}", col + 1),
    }
}

/// `"<row key>'s <header> is <value>."`, or `"The <header> is <value>."` for
/// cells in the key column itself.
pub fn template_fact(table: &Table, key_col: usize, cell: CellRef) -> Fact {
    let value = table.cell(cell).unwrap_or_default().trim().to_string();
    let header = header_label(table, cell.col);
    let shown = if matches!(coerce_cell(&value), TypedValue::Missing) {
        "missing"
    } else {
        value.as_str()
    };
    let key = table
        .cell(CellRef::new(cell.row, key_col))
        .map(str::trim)
        .filter(|k| !k.is_empty() && cell.col != key_col);
    let text = match key {
        Some(k) => format!("{k}'s {header} is {shown}."),
        None if cell.col == key_col => format!("The {header} is {shown}."),
        None => format!("Row {}'s {header} is {shown}.", cell.row + 1),
    };
    Fact::cell(text, cell, value)
}

pub fn template_cell_facts(table: &Table, cells: &AttributionSet) -> Vec<Fact> {
    let key = row_key_column(table);
    cells
        .iter()
        .filter(|c| table.contains(**c))
        .map(|&c| template_fact(table, key, c))
        .collect()
}

/// Model-written cell facts. Cells the model skips get a template fact;
/// empty cells never reach the model.
pub fn llm_cell_facts(
    ctx: &AgentContext<'_>,
    table: &Table,
    cells: &AttributionSet,
    diags: &mut Vec<String>,
) -> Result<Vec<Fact>, AgentError> {
    let key = row_key_column(table);
    let (missing, present): (Vec<Fact>, Vec<Fact>) = template_cell_facts(table, cells)
        .into_iter()
        .partition(|f| f.missing);
    if present.is_empty() {
        return Ok(missing);
    }
    let listing = present
        .iter()
        .map(|f| {
            let c = f.source.expect("cell facts have a source");
            let mut line = format!(
                "[{}, {}] {} = {}",
                c.row,
                c.col,
                header_label(table, c.col),
                f.value.as_deref().unwrap_or_default()
            );
            if c.col != key {
                line.push_str(&format!(
                    " (row key: {})",
                    table.cell(CellRef::new(c.row, key)).unwrap_or_default().trim()
                ));
            }
            line
        })
        .collect::<Vec<_>>()
        .join("\n");
    let rendered = ctx.render(table);
    let metadata = render_metadata(table);
    let raw = ctx.ask(
        prompts::CELL_FACTS,
        &[("metadata", &metadata), ("table", &rendered), ("cells", &listing)],
        |v| {
            let list = match v {
                Value::Array(a) => a,
                _ => array(field(v, "facts")?, "facts")?,
            };
            list.iter()
                .map(|item| {
                    let cell = as_pair(field(item, "cell")?).ok_or("`cell` must be [row, column]")?;
                    let text = field(item, "fact").ok().and_then(as_text).ok_or("`fact` must be a non-empty string")?;
                    Ok((cell, text))
                })
                .collect::<Result<Vec<_>, String>>()
        },
    )?;
    let mut by_cell: BTreeMap<CellRef, Vec<String>> = BTreeMap::new();
    for ((r, c), text) in raw {
        let known = (r >= 0 && c >= 0)
            .then(|| CellRef::new(r as usize, c as usize))
            .filter(|cell| present.iter().any(|f| f.source == Some(*cell)));
        match known {
            Some(cell) => by_cell.entry(cell).or_default().push(text),
            None => diags.push(format!("cell facts: ignored fact for unlisted cell [{r}, {c}]")),
        }
    }
    let mut out = Vec::new();
    for f in present {
        let cell = f.source.expect("cell facts have a source");
        match by_cell.remove(&cell) {
            Some(texts) => {
                let value = f.value.clone().unwrap_or_default();
                out.extend(texts.into_iter().map(|t| Fact::cell(t, cell, value.clone())));
            }
            None => {
                diags.push(format!("cell facts: no fact for {cell}, used the template"));
                out.push(f);
            }
        }
    }
    out.extend(missing);
    Ok(out)
}

pub fn llm_answer_facts(
    ctx: &AgentContext<'_>,
    question: &str,
    answer: &str,
    diags: &mut Vec<String>,
) -> Result<Vec<Fact>, AgentError> {
    let facts = ctx.ask(
        prompts::ANSWER_FACTS,
        &[("question", question), ("answer", answer)],
        |v| {
            let list = match v {
                Value::Array(a) => a,
                _ => array(field(v, "facts")?, "facts")?,
            };
            Ok(list.iter().filter_map(as_text).collect::<Vec<_>>())
        },
    )?;
    if facts.is_empty() {
        diags.push("answer facts: none extracted, using the whole answer".into());
        return Ok(vec![Fact::answer(answer.trim())]);
    }
    Ok(facts.into_iter().map(Fact::answer).collect())
}

const PREPOSITIONS: &[&str] = &[" in ", " on ", " at ", " for ", " of ", " as ", " with ", " from ", " by "];

/// Offline answer splitting: sentences, then `and`/`;`-joined clauses. A
/// clause starting in lower case borrows the previous clause's lead-in up to
/// its last preposition, so "X starred in A and B" yields "X starred in B".
pub fn clause_answer_facts(answer: &str) -> Vec<Fact> {
    let mut facts = Vec::new();
    for sentence in split_sentences(answer) {
        let mut prev: Option<String> = None;
        for part in split_conjunctions(&sentence) {
            let part = part.trim().trim_end_matches(['.', ',']).trim();
            if part.is_empty() {
                continue;
            }
            let starts_lower = part.chars().next().is_some_and(char::is_lowercase);
            let text = match (&prev, starts_lower) {
                (Some(p), true) => {
                    let cut = PREPOSITIONS
                        .iter()
                        .filter_map(|prep| p.rfind(prep).map(|i| i + prep.len()))
                        .max();
                    match cut {
                        Some(i) => format!("{}{}", &p[..i], part),
                        None => part.to_string(),
                    }
                }
                _ => part.to_string(),
            };
            prev = Some(text.clone());
            facts.push(Fact::answer(format!("{text}.")));
        }
    }
    if facts.is_empty() && !answer.trim().is_empty() {
        facts.push(Fact::answer(answer.trim()));
    }
    facts
}

fn split_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let chars: Vec<char> = text.chars().collect();
    for (i, &ch) in chars.iter().enumerate() {
        cur.push(ch);
        let boundary = matches!(ch, '.' | '!' | '?' | ';')
            && chars.get(i + 1).is_none_or(|n| n.is_whitespace())
            // Keep decimals and initials such as "J. Smith" together.
            && !(ch == '.' && i > 0 && chars[i - 1].is_uppercase() && (i < 2 || !chars[i - 2].is_alphanumeric()));
        if boundary {
            out.push(std::mem::take(&mut cur));
        }
    }
    out.push(cur);
    out.into_iter().filter(|s| !s.trim().is_empty()).collect()
}

fn split_conjunctions(sentence: &str) -> Vec<String> {
    let mut parts = vec![sentence.to_string()];
    for sep in [", and ", " and "] {
        parts = parts
            .into_iter()
            .flat_map(|p| {
                let pieces: Vec<&str> = p.split(sep).collect();
                // Short pieces are usually list items inside one fact ("cost and scalability").
                if pieces.len() > 1 && pieces.iter().all(|x| x.split_whitespace().count() >= 2) {
                    pieces.into_iter().map(str::to_string).collect()
                } else {
                    vec![p]
                }
            })
            .collect();
    }
    parts
}

/// Judges whether each `(cell fact, answer fact)` pair is a support.
pub trait SupportJudge: Send + Sync {
    fn judge_pairs(&self, pairs: &[(&Fact, &Fact)]) -> Result<Vec<bool>, AgentError>;
}

/// Supported iff the normalized texts are identical.
pub struct ExactMatchJudge;

impl SupportJudge for ExactMatchJudge {
    fn judge_pairs(&self, pairs: &[(&Fact, &Fact)]) -> Result<Vec<bool>, AgentError> {
        Ok(pairs
            .iter()
            .map(|(c, a)| normalize(&c.text) == normalize(&a.text))
            .collect())
    }
}

/// Supported iff the cell value occurs in the answer fact as a whole token run.
pub struct ValueOverlapJudge;

impl SupportJudge for ValueOverlapJudge {
    fn judge_pairs(&self, pairs: &[(&Fact, &Fact)]) -> Result<Vec<bool>, AgentError> {
        Ok(pairs
            .iter()
            .map(|(c, a)| {
                let value = normalize(c.value.as_deref().unwrap_or(&c.text));
                !value.is_empty() && contains_token_run(&normalize(&a.text), &value)
            })
            .collect())
    }
}

pub fn normalize(s: &str) -> String {
    let s: String = s
        .chars()
        .map(|c| match c {
            '–' | '—' | '−' => '-',
            c => c,
        })
        .flat_map(char::to_lowercase)
        .collect();
    s.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .trim_end_matches('.')
        .to_string()
}

fn contains_token_run(haystack: &str, needle: &str) -> bool {
    haystack.match_indices(needle).any(|(i, _)| {
        let before = haystack[..i].chars().next_back();
        let after = haystack[i + needle.len()..].chars().next();
        !before.is_some_and(char::is_alphanumeric) && !after.is_some_and(char::is_alphanumeric)
    })
}

/// Batched yes/no judgments from the chat model.
pub struct LlmSupportJudge<'a> {
    ctx: &'a AgentContext<'a>,
}

impl<'a> LlmSupportJudge<'a> {
    pub fn new(ctx: &'a AgentContext<'a>) -> Self {
        LlmSupportJudge { ctx }
    }
}

impl SupportJudge for LlmSupportJudge<'_> {
    fn judge_pairs(&self, pairs: &[(&Fact, &Fact)]) -> Result<Vec<bool>, AgentError> {
        let listing = pairs
            .iter()
            .enumerate()
            .map(|(i, (c, a))| format!("{i}. Table fact: {}\n   Answer fact: {}", c.text, a.text))
            .collect::<Vec<_>>()
            .join("\n");
        let n = pairs.len();
        self.ctx.ask(prompts::FACT_SUPPORT, &[("pairs", &listing)], |v| {
            let list = match v {
                Value::Array(a) => a,
                _ => array(field(v, "judgments")?, "judgments")?,
            };
            let mut out = vec![None; n];
            for (pos, item) in list.iter().enumerate() {
                let (id, verdict) = match item {
                    Value::Bool(b) => (pos as i64, Some(*b)),
                    _ => (
                        item.get("id").and_then(crate::context::as_int).unwrap_or(pos as i64),
                        item.get("supported").and_then(Value::as_bool),
                    ),
                };
                let verdict = verdict.ok_or_else(|| format!("judgment {pos} lacks boolean `supported`"))?;
                match usize::try_from(id).ok().and_then(|i| out.get_mut(i)) {
                    Some(slot) => *slot = Some(verdict),
                    None => return Err(format!("judgment for unknown pair {id}")),
                }
            }
            out.into_iter()
                .enumerate()
                .map(|(i, v)| v.ok_or_else(|| format!("no judgment for pair {i}")))
                .collect()
        })
    }
}

/// Judges all (cell fact, answer fact) pairs in batches of [`SUPPORT_BATCH`]
/// and folds the verdicts into counts. Missing-value cell facts are skipped;
/// a failed batch counts as unsupported.
pub fn align_facts(
    cell_facts: &[Fact],
    answer_facts: &[Fact],
    judge: &dyn SupportJudge,
    diags: &mut Vec<String>,
) -> FactCounts {
    let cells: Vec<&Fact> = cell_facts
        .iter()
        .filter(|f| {
            if f.missing {
                diags.push(format!("cell fact `{}` has no value; excluded", f.text));
            }
            !f.missing
        })
        .collect();
    let pairs: Vec<(usize, usize)> = (0..answer_facts.len())
        .flat_map(|a| (0..cells.len()).map(move |c| (c, a)))
        .collect();
    let mut supported = vec![false; pairs.len()];
    for (batch_no, chunk) in pairs.chunks(SUPPORT_BATCH).enumerate() {
        let batch: Vec<(&Fact, &Fact)> = chunk.iter().map(|&(c, a)| (cells[c], &answer_facts[a])).collect();
        match judge.judge_pairs(&batch) {
            Ok(v) if v.len() == batch.len() => {
                supported[batch_no * SUPPORT_BATCH..batch_no * SUPPORT_BATCH + v.len()].copy_from_slice(&v);
            }
            Ok(v) => diags.push(format!(
                "support batch {batch_no}: expected {} verdicts, got {}; counted as unsupported",
                batch.len(),
                v.len()
            )),
            Err(e) => diags.push(format!("support batch {batch_no} failed ({e}); counted as unsupported")),
        }
    }
    let mut answer_hit = vec![false; answer_facts.len()];
    let mut cell_hit = vec![false; cells.len()];
    for (&(c, a), &s) in pairs.iter().zip(&supported) {
        if s {
            answer_hit[a] = true;
            cell_hit[c] = true;
        }
    }
    let a = answer_hit.iter().filter(|&&x| x).count();
    let c = cell_hit.iter().filter(|&&x| x).count();
    FactCounts {
        a,
        b: answer_facts.len() - a,
        c,
        d: cells.len() - c,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellFactMode {
    Template,
    Llm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnswerFactMode {
    Llm,
    Clauses,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SupportMode {
    Llm,
    Lexical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FairScoreConfig {
    pub cell_facts: CellFactMode,
    pub answer_facts: AnswerFactMode,
    pub support: SupportMode,
}

impl Default for FairScoreConfig {
    fn default() -> Self {
        FairScoreConfig {
            cell_facts: CellFactMode::Template,
            answer_facts: AnswerFactMode::Llm,
            support: SupportMode::Llm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFairScore {
    pub instance_id: String,
    pub counts: FactCounts,
    pub score: FairScore,
    pub cell_facts: Vec<Fact>,
    pub answer_facts: Vec<Fact>,
    pub diagnostics: Vec<String>,
}

/// All three stages for one instance and its predicted cells.
pub fn score_instance(
    ctx: &AgentContext<'_>,
    instance_id: &str,
    table: &Table,
    question: &str,
    answer: &str,
    cells: &AttributionSet,
    config: FairScoreConfig,
) -> Result<InstanceFairScore, AgentError> {
    let mut diags = Vec::new();
    let cell_facts = match config.cell_facts {
        CellFactMode::Template => template_cell_facts(table, cells),
        CellFactMode::Llm => llm_cell_facts(ctx, table, cells, &mut diags)?,
    };
    let answer_facts = match config.answer_facts {
        AnswerFactMode::Llm => llm_answer_facts(ctx, question, answer, &mut diags)?,
        AnswerFactMode::Clauses => clause_answer_facts(answer),
    };
    let llm_judge;
    let judge: &dyn SupportJudge = match config.support {
        SupportMode::Llm => {
            llm_judge = LlmSupportJudge::new(ctx);
            &llm_judge
        }
        SupportMode::Lexical => &ValueOverlapJudge,
    };
    let counts = align_facts(&cell_facts, &answer_facts, judge, &mut diags);
    Ok(InstanceFairScore {
        instance_id: instance_id.to_string(),
        counts,
        score: fairscore(counts),
        cell_facts,
        answer_facts,
        diagnostics: diags,
    })
}

/// Estimated versus reference cell-level scores for one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub dataset: Dataset,
    pub n: usize,
    pub pred_precision: f64,
    pub actual_precision: f64,
    pub delta_precision: f64,
    pub pred_recall: f64,
    pub actual_recall: f64,
    pub delta_recall: f64,
}

/// Per-dataset means of estimated and reference scores; `delta = pred - actual`.
pub fn calibrate(items: &[(Dataset, FairScore, PRScore)]) -> Vec<CalibrationRow> {
    let mut groups: BTreeMap<Dataset, Vec<(FairScore, PRScore)>> = BTreeMap::new();
    for (d, f, p) in items {
        groups.entry(*d).or_default().push((*f, *p));
    }
    groups
        .into_iter()
        .map(|(dataset, xs)| {
            let n = xs.len();
            let mean = |g: &dyn Fn(&(FairScore, PRScore)) -> f64| xs.iter().map(g).sum::<f64>() / n as f64;
            let pred_precision = mean(&|x| x.0.precision);
            let actual_precision = mean(&|x| x.1.precision);
            let pred_recall = mean(&|x| x.0.recall);
            let actual_recall = mean(&|x| x.1.recall);
            CalibrationRow {
                dataset,
                n,
                pred_precision,
                actual_precision,
                delta_precision: pred_precision - actual_precision,
                pred_recall,
                actual_recall,
                delta_recall: pred_recall - actual_recall,
            }
        })
        .collect()
}
