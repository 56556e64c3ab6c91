//! The five attribution agents. Each pushes human-readable notes about
//! anything it had to repair or discard onto `diags`.

use std::collections::{BTreeMap, BTreeSet};

use cellattr_core::filter::{evaluate_filter, parse_filter, resolve_column, ColumnRef};
use cellattr_core::table::{prune, AttributionSet, CellRef, PrunedTable, Table};
use cellattr_core::types::{PhraseAlignment, Span};
use serde_json::Value;

use crate::context::{array, as_int, as_pair, as_text, field, render_columns, render_metadata, AgentContext};
use crate::error::AgentError;
use crate::judge::EntailmentJudge;
use crate::prompts;
use crate::types::{ColumnSelection, SubAttribution, SubQuestion};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttributionMode {
    /// All sub-questions in one prompt.
    Joint,
    /// One prompt per sub-question.
    PerSubquery,
}

pub fn select_columns(
    ctx: &AgentContext<'_>,
    table: &Table,
    question: &str,
    answer: &str,
    diags: &mut Vec<String>,
) -> Result<ColumnSelection, AgentError> {
    if table.n_cols() == 1 {
        return Ok(ColumnSelection::everything(1));
    }
    let rendered = ctx.render(table);
    let metadata = render_metadata(table);
    let columns = render_columns(table);
    let (explicit, implicit) = ctx.ask(
        prompts::COLUMN_RELEVANCE,
        &[
            ("metadata", &metadata),
            ("columns", &columns),
            ("table", &rendered),
            ("question", question),
            ("answer", answer),
        ],
        |v| {
            if let Some(list) = v.as_array() {
                return Ok((list.clone(), Vec::new()));
            }
            let get = |k: &str| v.get(k).map(|x| array(x, k).cloned()).transpose();
            match (get("explicit")?, get("implicit")?) {
                (None, None) => Err("expected `explicit` and `implicit` column lists".into()),
                (e, i) => Ok((e.unwrap_or_default(), i.unwrap_or_default())),
            }
        },
    )?;
    let mut resolve = |items: &[Value]| -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        for item in items {
            let col = match (as_int(item), item.as_str()) {
                (Some(i), _) if i >= 0 && (i as usize) < table.n_cols() => Some(i as usize),
                (None, Some(name)) => resolve_column(table, &ColumnRef::Name(name.to_string())).ok(),
                _ => None,
            };
            match col {
                Some(c) => {
                    out.insert(c);
                }
                None => diags.push(format!("column selection: ignored invalid column {item}")),
            }
        }
        out
    };
    let explicit = resolve(&explicit);
    let implicit: BTreeSet<usize> = resolve(&implicit).difference(&explicit).copied().collect();
    let selection = ColumnSelection { explicit, implicit };
    if selection.all().is_empty() {
        diags.push("column selection: no valid columns, keeping all".into());
        return Ok(ColumnSelection::everything(table.n_cols()));
    }
    Ok(selection)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvidenceRows {
    pub filter_text: String,
    pub rows: BTreeSet<usize>,
}

pub fn extract_evidence_rows(
    ctx: &AgentContext<'_>,
    table: &Table,
    columns: &ColumnSelection,
    question: &str,
    answer: &str,
    diags: &mut Vec<String>,
) -> Result<EvidenceRows, AgentError> {
    let view = prune(table, &table.all_rows(), &columns.all())?;
    let rendered = ctx.render(view.view());
    let metadata = render_metadata(table);
    let names = view.view().headers().join(", ");
    let vars = [
        ("metadata", metadata.as_str()),
        ("columns", names.as_str()),
        ("table", rendered.as_str()),
        ("question", question),
        ("answer", answer),
    ];
    let filter_text = ctx.ask(prompts::EVIDENCE_SPAN, &vars, |v| match field(v, "filter")? {
        Value::Null => Ok(String::new()),
        Value::String(s) => Ok(s.trim().to_string()),
        other => Err(format!("`filter` must be a string, got {other}")),
    })?;
    if filter_text.is_empty() {
        return Ok(EvidenceRows {
            filter_text,
            rows: table.all_rows(),
        });
    }
    let problem = match parse_filter(&filter_text).and_then(|e| evaluate_filter(&e, table)) {
        Ok(rows) if !rows.is_empty() => return Ok(EvidenceRows { filter_text, rows }),
        Ok(_) => "matched no rows".to_string(),
        Err(e) => e.to_string(),
    };
    diags.push(format!(
        "row filter `{filter_text}` {problem}; asked for a row listing instead"
    ));
    let listed = ctx.ask(prompts::ROW_LISTING, &vars, |v| {
        let list = match v {
            Value::Array(a) => a,
            _ => array(field(v, "rows")?, "rows")?,
        };
        Ok(list.clone())
    })?;
    let mut rows = BTreeSet::new();
    for item in &listed {
        match as_int(item) {
            Some(r) if r >= 0 && (r as usize) < table.n_rows() => {
                rows.insert(r as usize);
            }
            _ => diags.push(format!("row listing: ignored invalid row {item}")),
        }
    }
    if rows.is_empty() {
        return Err(AgentError::NoEvidence(format!(
            "filter `{filter_text}` {problem} and the row listing named no valid rows"
        )));
    }
    Ok(EvidenceRows { filter_text, rows })
}

pub fn decompose_query(
    ctx: &AgentContext<'_>,
    view: &Table,
    question: &str,
    answer: &str,
    judge: &dyn EntailmentJudge,
    diags: &mut Vec<String>,
) -> Result<Vec<SubQuestion>, AgentError> {
    let rendered = ctx.render(view);
    let metadata = render_metadata(view);
    let raw = ctx.ask(
        prompts::QUERY_DECOMPOSITION,
        &[
            ("metadata", &metadata),
            ("table", &rendered),
            ("question", question),
            ("answer", answer),
        ],
        |v| {
            let list = match v {
                Value::Array(a) => a,
                _ => array(field(v, "subquestions")?, "subquestions")?,
            };
            let mut out = Vec::new();
            for item in list {
                let (q, f) = match item {
                    Value::String(s) => (as_text(&Value::String(s.clone())), None),
                    Value::Object(o) => (
                        o.get("question").and_then(as_text),
                        o.get("fact").and_then(as_text),
                    ),
                    _ => (None, None),
                };
                match q {
                    Some(q) => out.push((q, f)),
                    None => return Err(format!("sub-question without text: {item}")),
                }
            }
            Ok(out)
        },
    )?;
    let mut subqs: Vec<SubQuestion> = raw
        .into_iter()
        .map(|(text, fact)| {
            let derived_fact = fact.unwrap_or_else(|| {
                diags.push(format!("sub-question `{text}` came without a fact; checking the answer itself"));
                answer.to_string()
            });
            SubQuestion {
                text,
                derived_fact,
                verified: None,
            }
        })
        .collect();
    if subqs.is_empty() {
        diags.push("decomposition returned no sub-questions; using the original question".into());
        subqs.push(SubQuestion {
            text: question.to_string(),
            derived_fact: answer.to_string(),
            verified: None,
        });
    }
    for sq in &mut subqs {
        match judge.judge(answer, &sq.derived_fact) {
            Ok(j) => sq.verified = Some(j.entailed),
            Err(e) => {
                diags.push(format!("entailment check failed for `{}`: {e}", sq.text));
                sq.verified = Some(false);
            }
        }
        if sq.verified == Some(false) {
            diags.push(format!("sub-question `{}` is not entailed by the answer", sq.text));
        }
    }
    if ctx.config.drop_unverified {
        let kept: Vec<SubQuestion> = subqs.iter().filter(|s| s.verified == Some(true)).cloned().collect();
        if kept.is_empty() {
            diags.push("every sub-question failed the entailment check; keeping them all".into());
        } else {
            subqs = kept;
        }
    }
    Ok(subqs)
}

pub fn attribute_subqueries(
    ctx: &AgentContext<'_>,
    pruned: &PrunedTable,
    subqs: &[SubQuestion],
    mode: AttributionMode,
    question: &str,
    answer: &str,
    diags: &mut Vec<String>,
) -> Result<Vec<SubAttribution>, AgentError> {
    let rendered = ctx.render(pruned.view());
    let metadata = render_metadata(pruned.view());
    let ask = |listing: &str| {
        ctx.ask(
            prompts::SUBQUERY_ATTRIBUTION,
            &[
                ("metadata", &metadata),
                ("table", &rendered),
                ("question", question),
                ("answer", answer),
                ("subquestions", listing),
            ],
            parse_attributions,
        )
    };
    let mut per_subq: Vec<Vec<Value>> = vec![Vec::new(); subqs.len()];
    match mode {
        AttributionMode::Joint => {
            let listing = subqs
                .iter()
                .enumerate()
                .map(|(i, s)| format!("{i}: {}", s.text))
                .collect::<Vec<_>>()
                .join("\n");
            for (pos, (id, cells)) in ask(&listing)?.into_iter().enumerate() {
                let id = id.unwrap_or(pos as i64);
                match usize::try_from(id).ok().filter(|&i| i < subqs.len()) {
                    Some(i) => per_subq[i].extend(cells),
                    None => diags.push(format!("attribution for unknown sub-question id {id} ignored")),
                }
            }
        }
        AttributionMode::PerSubquery => {
            for (i, sq) in subqs.iter().enumerate() {
                for (_, cells) in ask(&format!("0: {}", sq.text))? {
                    per_subq[i].extend(cells);
                }
            }
        }
    }
    let mut out = Vec::with_capacity(subqs.len());
    for (i, (sq, raw)) in subqs.iter().zip(per_subq).enumerate() {
        let mut cells = AttributionSet::new();
        for item in raw {
            let mapped = as_pair(&item)
                .filter(|&(r, c)| r >= 0 && c >= 0)
                .and_then(|(r, c)| pruned.to_original(CellRef::new(r as usize, c as usize)).ok());
            match mapped {
                Some(cell) => {
                    cells.insert(cell);
                }
                None => diags.push(format!(
                    "sub-question {i}: dropped coordinate {item} outside the {}x{} view",
                    pruned.view().n_rows(),
                    pruned.view().n_cols()
                )),
            }
        }
        if cells.is_empty() {
            diags.push(format!("sub-question {i} (`{}`) has no supporting cells", sq.text));
        }
        out.push(SubAttribution {
            sub_question: sq.clone(),
            cells,
        });
    }
    Ok(out)
}

type RawAttribution = (Option<i64>, Vec<Value>);

fn parse_attributions(v: &Value) -> Result<Vec<RawAttribution>, String> {
    let list = match v {
        Value::Array(a) => a,
        _ => array(field(v, "attributions")?, "attributions")?,
    };
    list.iter()
        .map(|item| {
            let id = item.get("id").and_then(as_int);
            let cells = array(field(item, "cells")?, "cells")?.clone();
            Ok((id, cells))
        })
        .collect()
}

pub struct Finalized {
    pub final_cells: AttributionSet,
    pub alignments: Vec<PhraseAlignment>,
}

pub fn finalize(
    ctx: &AgentContext<'_>,
    table: &Table,
    question: &str,
    answer: &str,
    sub_attrs: &[SubAttribution],
    diags: &mut Vec<String>,
) -> Result<Finalized, AgentError> {
    let final_cells = sub_attrs.iter().fold(AttributionSet::new(), |mut acc, s| {
        acc.extend_from(&s.cells);
        acc
    });
    if final_cells.is_empty() {
        diags.push("no cells to align; skipped phrase alignment".into());
        return Ok(Finalized {
            final_cells,
            alignments: Vec::new(),
        });
    }
    let listing = final_cells
        .iter()
        .map(|&c| {
            format!(
                "({}, {}) {} = {}",
                c.row,
                c.col,
                table.header(c.col).unwrap_or_default(),
                table.cell(c).unwrap_or_default()
            )
        })
        .collect::<Vec<_>>()
        .join("\n");
    let raw = ctx.ask(
        prompts::FINAL_ATTRIBUTION,
        &[("question", question), ("answer", answer), ("cells", &listing)],
        |v| {
            let list = match v {
                Value::Array(a) => a,
                _ => array(field(v, "alignments")?, "alignments")?,
            };
            list.iter()
                .map(|item| {
                    let phrase = field(item, "phrase")?
                        .as_str()
                        .ok_or("`phrase` must be a string")?
                        .to_string();
                    Ok((phrase, array(field(item, "cells")?, "cells")?.clone()))
                })
                .collect::<Result<Vec<_>, String>>()
        },
    )?;
    let mut next_from: BTreeMap<String, usize> = BTreeMap::new();
    let mut alignments = Vec::new();
    for (phrase, cells) in raw {
        let from = next_from.get(&phrase).copied().unwrap_or(0);
        let Some(span) = locate_phrase(answer, phrase.trim(), from) else {
            diags.push(format!("discarded phrase `{phrase}`: not found in the answer"));
            continue;
        };
        next_from.insert(phrase.clone(), span.end);
        let mut kept = AttributionSet::new();
        for item in cells {
            match as_pair(&item).filter(|&(r, c)| r >= 0 && c >= 0) {
                Some((r, c)) if final_cells.contains(&CellRef::new(r as usize, c as usize)) => {
                    kept.insert(CellRef::new(r as usize, c as usize));
                }
                _ => diags.push(format!("phrase `{phrase}`: dropped cell {item} not among the attributed cells")),
            }
        }
        if kept.is_empty() {
            diags.push(format!("discarded phrase `{phrase}`: no valid cells"));
            continue;
        }
        alignments.push(PhraseAlignment {
            phrase: span,
            cells: kept,
        });
    }
    alignments.sort_by_key(|a| (a.phrase.start, a.phrase.end));
    Ok(Finalized {
        final_cells,
        alignments,
    })
}

/// Exact match first, then a case-insensitive match whose span text is
/// taken from the answer.
fn locate_phrase(answer: &str, phrase: &str, from: usize) -> Option<Span> {
    if let Some(s) = Span::locate(answer, phrase, from) {
        return Some(s);
    }
    let a: Vec<char> = answer.chars().collect();
    let p: Vec<char> = phrase.chars().collect();
    if p.is_empty() || p.len() > a.len() {
        return None;
    }
    let same = |x: char, y: char| x.to_lowercase().eq(y.to_lowercase());
    (from..=a.len() - p.len())
        .find(|&i| p.iter().zip(&a[i..]).all(|(&x, &y)| same(x, y)))
        .map(|start| Span {
            start,
            end: start + p.len(),
            text: a[start..start + p.len()].iter().collect(),
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phrase_location() {
        let answer = "Wind Power, 30–45% efficiency.";
        assert_eq!(locate_phrase(answer, "30–45%", 0).unwrap().start, 12);
        let s = locate_phrase(answer, "wind power", 0).unwrap();
        assert_eq!((s.start, s.end, s.text.as_str()), (0, 10, "Wind Power"));
        assert!(locate_phrase(answer, "Solar", 0).is_none());
        assert!(locate_phrase(answer, "Wind", 1).is_none());
        assert!(locate_phrase("ab", "abc", 0).is_none());
    }
}
