//! A backend that answers from gold labels, standing in for a perfect model.
//!
//! Instances are recognised by the `Question:` and `Answer:` lines of the
//! prompt. Coordinates in a pruned view are recovered by reading the
//! rendered table back and matching it against the original.

use std::collections::{BTreeSet, HashMap};

use cellattr_core::coerce::{coerce_cell, TypedValue};
use cellattr_core::table::{AttributionSet, CellRef, Table};
use cellattr_core::types::QAInstance;
use cellattr_llm::{ChatBackend, ChatRequest, ChatResponse, LlmError};
use serde_json::{json, Value};

use crate::backends::respond;

pub struct OracleBackend {
    by_qa: HashMap<(String, String), QAInstance>,
}

impl OracleBackend {
    pub fn new<'a>(instances: impl IntoIterator<Item = &'a QAInstance>) -> Self {
        let by_qa = instances
            .into_iter()
            .map(|i| ((i.question.trim().to_string(), i.answer.trim().to_string()), i.clone()))
            .collect();
        OracleBackend { by_qa }
    }

    fn instance(&self, user: &str) -> Result<&QAInstance, LlmError> {
        let q = line_after(user, "Question: ")
            .or_else(|| line_after(user, "Original question: "))
            .unwrap_or_default();
        let a = line_after(user, "Answer: ").unwrap_or_default();
        self.by_qa
            .get(&(q.trim().to_string(), a.trim().to_string()))
            .ok_or_else(|| LlmError::Protocol(format!("oracle knows no instance for question `{q}`")))
    }

    fn reply(&self, request: &ChatRequest) -> Result<Value, LlmError> {
        let user = &request.user_prompt;
        Ok(match request.tag.as_str() {
            "entailment" => json!({"entailed": true, "score": 1.0}),
            "cell_facts" => cell_facts(user),
            "fact_support" => fact_support(user),
            "answer_facts" => {
                let a = line_after(user, "Answer: ").unwrap_or_default();
                json!({"facts": [a.trim()]})
            }
            "column_relevance" => {
                let gold = gold(self.instance(user)?);
                json!({"explicit": gold.cols(), "implicit": []})
            }
            "evidence_span" => json!({"filter": key_filter(self.instance(user)?)}),
            "row_listing" => json!({"rows": gold(self.instance(user)?).rows()}),
            "query_decomposition" => {
                let inst = self.instance(user)?;
                let subqs: Vec<Value> = inst
                    .gold
                    .iter()
                    .flatten()
                    .map(|al| json!({"question": subquestion_for(&al.phrase.text), "fact": inst.answer}))
                    .collect();
                if subqs.is_empty() {
                    json!({"subquestions": [{"question": inst.question, "fact": inst.answer}]})
                } else {
                    json!({"subquestions": subqs})
                }
            }
            "subquery_attribution" => {
                let inst = self.instance(user)?;
                let view = parse_rendered(user)
                    .ok_or_else(|| LlmError::Protocol("oracle could not read the table".into()))?;
                let (rows, cols) = locate_view(&inst.table, &view)
                    .ok_or_else(|| LlmError::Protocol("oracle could not match the view".into()))?;
                let to_view = |c: &CellRef| {
                    let r = rows.iter().position(|&x| x == c.row)?;
                    let k = cols.iter().position(|&x| x == c.col)?;
                    Some(json!([r, k]))
                };
                let listing = user.split("Sub-questions:\n").nth(1).unwrap_or_default();
                let mut out = Vec::new();
                for line in listing.lines() {
                    let Some((id, text)) = line.split_once(": ") else { continue };
                    let Ok(id) = id.trim().parse::<usize>() else { continue };
                    let cells = inst
                        .gold
                        .iter()
                        .flatten()
                        .find(|al| subquestion_for(&al.phrase.text) == text.trim())
                        .map(|al| al.cells.clone())
                        .unwrap_or_else(|| gold(inst));
                    let cells: Vec<Value> = cells.iter().filter_map(to_view).collect();
                    out.push(json!({"id": id, "cells": cells}));
                }
                json!({"attributions": out})
            }
            "final_attribution" => {
                let inst = self.instance(user)?;
                let listed: BTreeSet<(usize, usize)> = user
                    .lines()
                    .filter_map(|l| {
                        let inner = l.strip_prefix('(')?.split_once(')')?.0;
                        let (r, c) = inner.split_once(", ")?;
                        Some((r.parse().ok()?, c.parse().ok()?))
                    })
                    .collect();
                let alignments: Vec<Value> = inst
                    .gold
                    .iter()
                    .flatten()
                    .map(|al| {
                        let cells: Vec<Value> = al
                            .cells
                            .iter()
                            .filter(|c| listed.contains(&(c.row, c.col)))
                            .map(|c| json!([c.row, c.col]))
                            .collect();
                        json!({"phrase": al.phrase.text, "cells": cells})
                    })
                    .collect();
                json!({"alignments": alignments})
            }
            other => return Err(LlmError::Protocol(format!("oracle has no answer for `{other}`"))),
        })
    }
}

impl ChatBackend for OracleBackend {
    fn send(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let value = self.reply(request)?;
        Ok(respond(request, value.to_string()))
    }
}

fn gold(inst: &QAInstance) -> AttributionSet {
    inst.gold_cells().unwrap_or_default()
}

pub fn subquestion_for(phrase: &str) -> String {
    format!("Which cells support \"{phrase}\"?")
}

fn line_after<'a>(text: &'a str, prefix: &str) -> Option<&'a str> {
    text.lines().find_map(|l| l.strip_prefix(prefix))
}

/// An equality filter on a column of distinct text values selecting the gold
/// rows, or the empty filter when no such column exists.
fn key_filter(inst: &QAInstance) -> String {
    let t = &inst.table;
    let rows = gold(inst).rows();
    if rows.is_empty() {
        return String::new();
    }
    let key = (0..t.n_cols()).find(|&c| {
        let mut seen = BTreeSet::new();
        t.rows().iter().all(|row| {
            matches!(coerce_cell(&row[c]), TypedValue::Text { .. }) && seen.insert(row[c].trim().to_lowercase())
        })
    });
    match key {
        Some(k) => {
            let parts: Vec<String> = rows
                .iter()
                .map(|&r| format!("#{k} = '{}'", t.rows()[r][k].trim().replace('\'', "''")))
                .collect();
            format!("WHERE {}", parts.join(" OR "))
        }
        None => String::new(),
    }
}

fn cell_facts(user: &str) -> Value {
    let facts: Vec<Value> = user
        .lines()
        .filter_map(|l| {
            let (coord, rest) = l.strip_prefix('[')?.split_once("] ")?;
            let (r, c) = coord.split_once(", ")?;
            let (r, c): (usize, usize) = (r.parse().ok()?, c.parse().ok()?);
            let (header, value) = rest.split_once(" = ")?;
            let fact = match value.rsplit_once(" (row key: ") {
                Some((v, key)) => format!("{}'s {header} is {v}.", key.trim_end_matches(')')),
                None => format!("The {header} is {value}."),
            };
            Some(json!({"cell": [r, c], "fact": fact}))
        })
        .collect();
    json!({"facts": facts})
}

fn fact_support(user: &str) -> Value {
    let mut judgments = Vec::new();
    let mut pending: Option<(usize, String)> = None;
    for line in user.lines() {
        if let Some((id, rest)) = line.split_once(". Table fact: ") {
            if let Ok(id) = id.trim().parse() {
                pending = Some((id, rest.to_string()));
            }
        } else if let (Some(answer), Some((id, table_fact))) =
            (line.trim_start().strip_prefix("Answer fact: "), pending.take())
        {
            let value = table_fact
                .rsplit_once(" is ")
                .map_or(table_fact.as_str(), |(_, v)| v)
                .trim_end_matches('.');
            judgments.push(json!({"id": id, "supported": mentions(answer, value)}));
        }
    }
    json!({"judgments": judgments})
}

fn normalize(s: &str) -> String {
    s.chars()
        .map(|c| if matches!(c, '–' | '—') { '-' } else { c })
        .flat_map(char::to_lowercase)
        .collect()
}

fn mentions(haystack: &str, needle: &str) -> bool {
    let (h, n) = (normalize(haystack), normalize(needle.trim()));
    !n.is_empty()
        && h.match_indices(&n).any(|(i, _)| {
            !h[..i].chars().next_back().is_some_and(char::is_alphanumeric)
                && !h[i + n.len()..].chars().next().is_some_and(char::is_alphanumeric)
        })
}

/// Headers and rows of the first table rendered in `text`, either format.
pub fn parse_rendered(text: &str) -> Option<(Vec<String>, Vec<Vec<String>>)> {
    let lines: Vec<&str> = text.lines().collect();
    let start = lines.iter().position(|l| l.starts_with("| row") || l.starts_with("row\t"))?;
    let markdown = lines[start].starts_with('|');
    let split = |line: &str| -> Vec<String> {
        let body = if markdown {
            line.strip_prefix("| ").and_then(|l| l.strip_suffix(" |")).unwrap_or(line)
        } else {
            line
        };
        split_escaped(body, if markdown { '|' } else { '\t' })
    };
    let headers: Vec<String> = split(lines[start])
        .into_iter()
        .skip(1)
        .map(|h| h.split_once(": ").map_or(h.clone(), |(_, name)| name.to_string()))
        .collect();
    let body_start = if markdown { start + 2 } else { start + 1 };
    let rows = lines[body_start.min(lines.len())..]
        .iter()
        .take_while(|l| if markdown { l.starts_with("| ") } else { l.contains('\t') })
        .map(|l| split(l).into_iter().skip(1).collect())
        .collect();
    Some((headers, rows))
}

fn split_escaped(body: &str, delimiter: char) -> Vec<String> {
    let mut fields = vec![String::new()];
    let mut chars = body.chars();
    while let Some(c) = chars.next() {
        match c {
            '\\' => match chars.next() {
                Some('n') => fields.last_mut().unwrap().push('\n'),
                Some('r') => fields.last_mut().unwrap().push('\r'),
                Some('t') => fields.last_mut().unwrap().push('\t'),
                Some(o) => fields.last_mut().unwrap().push(o),
                None => {}
            },
            c if c == delimiter => fields.push(String::new()),
            c => fields.last_mut().unwrap().push(c),
        }
    }
    fields.into_iter().map(|f| f.trim().to_string()).collect()
}

/// Original row and column indices of each view row and column.
fn locate_view(table: &Table, (headers, rows): &(Vec<String>, Vec<Vec<String>>)) -> Option<(Vec<usize>, Vec<usize>)> {
    let mut cols = Vec::new();
    let mut next = 0;
    for h in headers {
        let c = (next..table.n_cols()).find(|&c| table.headers()[c].trim() == h)?;
        cols.push(c);
        next = c + 1;
    }
    let mut out_rows = Vec::new();
    let mut next = 0;
    for row in rows {
        let r = (next..table.n_rows())
            .find(|&r| cols.iter().zip(row).all(|(&c, v)| table.rows()[r][c].trim() == v))?;
        out_rows.push(r);
        next = r + 1;
    }
    Some((out_rows, cols))
}

#[cfg(test)]
mod tests {
    use super::*;
    use cellattr_core::table::{prune, render_table, RenderFormat};

    #[test]
    fn reads_back_rendered_views() {
        let t = Table::from_strs(&["A", "B|x", "C"], &[&["1", "p|q", "a\\b"], &["2", "r", "s"], &["3", "t", "u"]]).unwrap();
        let view = prune(&t, &[0, 2].into_iter().collect(), &[1, 2].into_iter().collect()).unwrap();
        for fmt in [RenderFormat::Markdown, RenderFormat::Delimited] {
            let text = format!("Table:\n{}Question: x", render_table(view.view(), fmt));
            let parsed = parse_rendered(&text).unwrap();
            assert_eq!(parsed.0, ["B|x", "C"]);
            assert_eq!(parsed.1, [["p|q", "a\\b"], ["t", "u"]]);
            assert_eq!(locate_view(&t, &parsed), Some((vec![0, 2], vec![1, 2])));
        }
    }

    #[test]
    fn support_heuristic() {
        let v = fact_support("Pairs:\n0. Table fact: Wind's Efficiency is 30–45.\n   Answer fact: Wind, 30-45% efficient.\n1. Table fact: The Source is Wind.\n   Answer fact: Windy days.");
        assert_eq!(v["judgments"][0]["supported"], true);
        assert_eq!(v["judgments"][1]["supported"], false);
    }
}
