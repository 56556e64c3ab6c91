//! Converters from the ToTTo, FetaQA and AITQA release formats.
//!
//! Each adapter reads the source JSON-lines and emits benchmark-format instances.
//! Human phrase alignments come from an optional annotations file (JSON-lines
//! of `{"id": ..., "gold": [...]}` keyed by the converted id); instances with
//! annotations become `gold`, the rest keep the source highlight as a single
//! whole-answer alignment and become `silver`. Multi-level headers are joined
//! with `" | "`.

use std::collections::{BTreeMap, HashMap};
use std::io::BufRead;

use serde::Deserialize;
use serde_json::Value;

use crate::datasets::{validate_value, LoadReport, ValidationError};
use crate::table::CellRef;
use crate::types::{Dataset, PhraseAlignment, Span};

pub const HEADER_JOIN: &str = " | ";

/// Annotated alignments by converted instance id.
pub type Annotations = HashMap<String, Vec<PhraseAlignment>>;

#[derive(Deserialize)]
struct AnnotationLine {
    id: String,
    gold: Vec<PhraseAlignment>,
}

pub fn read_annotations<R: BufRead>(reader: R) -> Result<Annotations, String> {
    let mut out = HashMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| e.to_string())?;
        if line.trim().is_empty() {
            continue;
        }
        let a: AnnotationLine =
            serde_json::from_str(&line).map_err(|e| format!("annotations line {}: {e}", i + 1))?;
        out.insert(a.id, a.gold);
    }
    Ok(out)
}

/// Joins the distinct non-empty levels of a header hierarchy.
pub fn flatten_header<S: AsRef<str>>(levels: &[S]) -> String {
    let mut parts: Vec<&str> = Vec::new();
    for l in levels {
        let l = l.as_ref().trim();
        if !l.is_empty() && parts.last() != Some(&l) {
            parts.push(l);
        }
    }
    parts.join(HEADER_JOIN)
}

struct Converted {
    id: String,
    dataset: Dataset,
    headers: Vec<String>,
    rows: Vec<Vec<String>>,
    metadata: BTreeMap<String, String>,
    question: String,
    answer: String,
    highlighted: Vec<CellRef>,
}

fn finish(line: usize, c: Converted, annotations: &Annotations, report: &mut LoadReport) {
    let (split, gold) = match annotations.get(&c.id) {
        Some(g) => ("gold", serde_json::to_value(g).expect("alignments serialize")),
        None if c.highlighted.is_empty() => {
            report.errors.push(ValidationError {
                line,
                id: Some(c.id),
                field: "gold".into(),
                message: format!("{} instance has neither annotations nor source highlights", c.dataset),
            });
            return;
        }
        None => {
            let span = Span {
                start: 0,
                end: c.answer.chars().count(),
                text: c.answer.clone(),
            };
            let cells: Vec<(usize, usize)> = c.highlighted.iter().map(|&x| x.into()).collect();
            (
                "silver",
                serde_json::json!([{ "phrase": span, "cells": cells }]),
            )
        }
    };
    let value = serde_json::json!({
        "id": c.id,
        "dataset": c.dataset,
        "split": split,
        "table": { "headers": c.headers, "rows": c.rows, "metadata": c.metadata },
        "question": c.question,
        "answer": c.answer,
        "gold": gold,
    });
    match validate_value(line, &value) {
        Ok(inst) => report.instances.push(inst),
        Err(errs) => report.errors.extend(errs),
    }
}

fn pad(rows: &mut [Vec<String>], width: usize) {
    for r in rows {
        r.resize(width, String::new());
    }
}

fn parse_line<T: for<'de> Deserialize<'de>>(
    line_no: usize,
    line: &str,
    report: &mut LoadReport,
) -> Option<T> {
    let value: Value = match serde_json::from_str(line) {
        Ok(v) => v,
        Err(e) => {
            report.errors.push(ValidationError {
                line: line_no,
                id: None,
                field: "<json>".into(),
                message: e.to_string(),
            });
            return None;
        }
    };
    let id = ["example_id", "feta_id", "id"]
        .iter()
        .find_map(|k| value.get(*k))
        .map(|v| v.to_string().trim_matches('"').to_string());
    serde_json::from_value(value)
        .map_err(|e| {
            report.errors.push(ValidationError {
                line: line_no,
                id,
                field: "<source schema>".into(),
                message: e.to_string(),
            })
        })
        .ok()
}

fn for_lines<R: BufRead>(
    reader: R,
    report: &mut LoadReport,
    mut each: impl FnMut(usize, &str, &mut LoadReport),
) -> std::io::Result<()> {
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if !line.trim().is_empty() {
            each(i + 1, &line, report);
        }
    }
    Ok(())
}

#[derive(Deserialize)]
struct TottoCell {
    value: String,
    #[serde(default)]
    is_header: bool,
    #[serde(default = "one")]
    column_span: usize,
    #[serde(default = "one")]
    row_span: usize,
}

fn one() -> usize {
    1
}

#[derive(Deserialize)]
struct TottoSentence {
    final_sentence: String,
}

#[derive(Deserialize)]
struct TottoExample {
    example_id: Value,
    table: Vec<Vec<TottoCell>>,
    #[serde(default)]
    table_page_title: String,
    #[serde(default)]
    table_section_title: String,
    #[serde(default)]
    highlighted_cells: Vec<(usize, usize)>,
    sentence_annotations: Vec<TottoSentence>,
    question: String,
}

/// ToTTo release format plus a `question` field per example.
///
/// Spanning cells are repeated over every grid position they cover; the
/// leading all-header rows become the flattened column headers, and
/// highlights in header rows are dropped.
pub fn import_totto<R: BufRead>(reader: R, annotations: &Annotations) -> std::io::Result<LoadReport> {
    let mut report = LoadReport::default();
    for_lines(reader, &mut report, |line_no, line, report| {
        let Some(ex) = parse_line::<TottoExample>(line_no, line, report) else {
            return;
        };
        let id = format!("totto-{}", ex.example_id.to_string().trim_matches('"'));
        // Expand spans. `origin[(r, k)]` is the grid column of the k-th source cell of row r.
        let mut grid: Vec<Vec<Option<(String, bool)>>> = vec![Vec::new(); ex.table.len()];
        let mut origin = HashMap::new();
        for (r, row) in ex.table.iter().enumerate() {
            let mut c = 0;
            for (k, cell) in row.iter().enumerate() {
                while grid[r].get(c).is_some_and(Option::is_some) {
                    c += 1;
                }
                origin.insert((r, k), c);
                for dr in 0..cell.row_span.max(1) {
                    let Some(target) = grid.get_mut(r + dr) else { break };
                    for dc in 0..cell.column_span.max(1) {
                        if target.len() <= c + dc {
                            target.resize(c + dc + 1, None);
                        }
                        target[c + dc] = Some((cell.value.clone(), cell.is_header));
                    }
                }
                c += cell.column_span.max(1);
            }
        }
        let width = grid.iter().map(Vec::len).max().unwrap_or(0);
        let header_rows = grid
            .iter()
            .take_while(|r| !r.is_empty() && r.iter().all(|c| c.as_ref().is_some_and(|(_, h)| *h)))
            .count();
        let headers: Vec<String> = (0..width)
            .map(|c| {
                let levels: Vec<&str> = grid[..header_rows]
                    .iter()
                    .filter_map(|r| r.get(c).and_then(|x| x.as_ref()).map(|(v, _)| v.as_str()))
                    .collect();
                let h = flatten_header(&levels);
                if h.is_empty() {
                    format!("Column {}", c + 1)
                } else {
                    h
                }
            })
            .collect();
        let mut rows: Vec<Vec<String>> = grid[header_rows..]
            .iter()
            .map(|r| r.iter().map(|c| c.as_ref().map(|(v, _)| v.clone()).unwrap_or_default()).collect())
            .collect();
        pad(&mut rows, width);
        let highlighted = ex
            .highlighted_cells
            .iter()
            .filter(|(r, _)| *r >= header_rows)
            .filter_map(|&(r, k)| origin.get(&(r, k)).map(|&c| CellRef::new(r - header_rows, c)))
            .collect();
        let mut metadata = BTreeMap::new();
        metadata.insert("source".into(), "ToTTo".into());
        metadata.insert("title".into(), ex.table_page_title);
        metadata.insert("section".into(), ex.table_section_title);
        let answer = ex
            .sentence_annotations
            .into_iter()
            .next()
            .map(|s| s.final_sentence)
            .unwrap_or_default();
        finish(
            line_no,
            Converted {
                id,
                dataset: Dataset::ToTTo,
                headers,
                rows,
                metadata,
                question: ex.question,
                answer,
                highlighted,
            },
            annotations,
            report,
        );
    })?;
    Ok(report)
}

#[derive(Deserialize)]
struct FetaExample {
    feta_id: Value,
    table_array: Vec<Vec<String>>,
    #[serde(default)]
    highlighted_cell_ids: Vec<(usize, usize)>,
    question: String,
    answer: String,
    #[serde(default)]
    table_page_title: String,
    #[serde(default)]
    table_section_title: String,
    #[serde(default)]
    page_wikipedia_url: String,
}

/// FetaQA release format. The first row of `table_array` is the header, so
/// highlighted row indices shift down by one.
pub fn import_fetaqa<R: BufRead>(reader: R, annotations: &Annotations) -> std::io::Result<LoadReport> {
    let mut report = LoadReport::default();
    for_lines(reader, &mut report, |line_no, line, report| {
        let Some(ex) = parse_line::<FetaExample>(line_no, line, report) else {
            return;
        };
        let id = format!("fetaqa-{}", ex.feta_id.to_string().trim_matches('"'));
        let mut array = ex.table_array.into_iter();
        let headers = array.next().unwrap_or_default();
        let rows: Vec<Vec<String>> = array.collect();
        let highlighted = ex
            .highlighted_cell_ids
            .iter()
            .filter(|(r, _)| *r >= 1)
            .map(|&(r, c)| CellRef::new(r - 1, c))
            .collect();
        let mut metadata = BTreeMap::new();
        metadata.insert("source".into(), "FetaQA".into());
        metadata.insert("title".into(), ex.table_page_title);
        metadata.insert("section".into(), ex.table_section_title);
        metadata.insert("url".into(), ex.page_wikipedia_url);
        finish(
            line_no,
            Converted {
                id,
                dataset: Dataset::FetaQA,
                headers,
                rows,
                metadata,
                question: ex.question,
                answer: ex.answer,
                highlighted,
            },
            annotations,
            report,
        );
    })?;
    Ok(report)
}

#[derive(Deserialize)]
struct AitqaTable {
    id: String,
    column_header: Vec<Vec<String>>,
    row_header: Vec<Vec<String>>,
    data: Vec<Vec<String>>,
}

#[derive(Deserialize)]
struct AitqaQuestion {
    id: Value,
    table_id: String,
    question: String,
    answers: Vec<Value>,
}

pub fn read_aitqa_tables<R: BufRead>(reader: R) -> Result<HashMap<String, Value>, String> {
    let mut out = HashMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| e.to_string())?;
        if line.trim().is_empty() {
            continue;
        }
        let v: Value = serde_json::from_str(&line).map_err(|e| format!("tables line {}: {e}", i + 1))?;
        let id = v
            .get("id")
            .and_then(Value::as_str)
            .ok_or_else(|| format!("tables line {}: missing id", i + 1))?
            .to_string();
        out.insert(id, v);
    }
    Ok(out)
}

/// AITQA questions joined with their tables by `table_id`.
///
/// The row hierarchy becomes a leading `Item` column and every column
/// hierarchy is flattened into one header. AITQA ships no attribution labels,
/// so every instance needs an annotation.
pub fn import_aitqa<R: BufRead>(
    reader: R,
    tables: &HashMap<String, Value>,
    annotations: &Annotations,
) -> std::io::Result<LoadReport> {
    let mut report = LoadReport::default();
    for_lines(reader, &mut report, |line_no, line, report| {
        let Some(q) = parse_line::<AitqaQuestion>(line_no, line, report) else {
            return;
        };
        let id = format!("aitqa-{}", q.id.to_string().trim_matches('"'));
        let table = match tables.get(&q.table_id).map(|v| serde_json::from_value::<AitqaTable>(v.clone())) {
            Some(Ok(t)) => t,
            Some(Err(e)) => {
                report.errors.push(ValidationError {
                    line: line_no,
                    id: Some(id),
                    field: "table".into(),
                    message: format!("table {}: {e}", q.table_id),
                });
                return;
            }
            None => {
                report.errors.push(ValidationError {
                    line: line_no,
                    id: Some(id),
                    field: "table_id".into(),
                    message: format!("unknown table `{}`", q.table_id),
                });
                return;
            }
        };
        if !annotations.contains_key(&id) {
            report.errors.push(ValidationError {
                line: line_no,
                id: Some(id),
                field: "gold".into(),
                message: "AITQA instances require annotations".into(),
            });
            return;
        }
        let mut headers = vec!["Item".to_string()];
        headers.extend(table.column_header.iter().map(|levels| flatten_header(levels)));
        let mut rows: Vec<Vec<String>> = table
            .data
            .iter()
            .enumerate()
            .map(|(r, data)| {
                let label = table.row_header.get(r).map(|l| flatten_header(l)).unwrap_or_default();
                std::iter::once(label).chain(data.iter().cloned()).collect()
            })
            .collect();
        pad(&mut rows, headers.len());
        let answer = q
            .answers
            .iter()
            .map(|a| a.as_str().map_or_else(|| a.to_string(), str::to_string))
            .collect::<Vec<_>>()
            .join(", ");
        let mut metadata = BTreeMap::new();
        metadata.insert("source".into(), "AITQA".into());
        metadata.insert("table_id".into(), table.id);
        finish(
            line_no,
            Converted {
                id,
                dataset: Dataset::AITQA,
                headers,
                rows,
                metadata,
                question: q.question,
                answer,
                highlighted: Vec::new(),
            },
            annotations,
            report,
        );
    })?;
    Ok(report)
}
