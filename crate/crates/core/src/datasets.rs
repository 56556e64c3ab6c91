//! Benchmark-format JSON-lines files: loading, validation, manifests and
//! corpus statistics.
//!
//! One instance per line:
//!
//! ```json
//! {"answer": "...", "dataset": "FetaQA", "gold": [{"cells": [[1, 2]],
//!  "phrase": {"end": 9, "start": 0, "text": "..."}}], "id": "...",
//!  "question": "...", "split": "gold",
//!  "table": {"headers": ["..."], "metadata": {}, "rows": [["..."]]}}
//! ```
//!
//! Keys are written sorted. Silver instances keep their source-dataset labels
//! in `gold` but are tagged `split: "silver"`.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::table::{AttributionSet, CellRef, Table};
use crate::types::{Dataset, PhraseAlignment, QAInstance, Span, Split, SplitFilter};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },
    #[error("no instances to summarize")]
    Empty,
}

/// One rejected instance. `field` is a dotted path into the instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationError {
    pub line: usize,
    pub id: Option<String>,
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for ValidationError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "line {} ({}): {}: {}",
            self.line,
            self.id.as_deref().unwrap_or("<no id>"),
            self.field,
            self.message
        )
    }
}

#[derive(Debug, Clone, Default)]
pub struct LoadReport {
    pub instances: Vec<QAInstance>,
    pub errors: Vec<ValidationError>,
}

impl LoadReport {
    pub fn is_partial(&self) -> bool {
        !self.errors.is_empty()
    }
}

#[derive(Deserialize)]
struct LooseInstance {
    id: String,
    dataset: String,
    split: String,
    table: LooseTable,
    question: String,
    answer: String,
    #[serde(default)]
    gold: Option<Vec<LooseAlignment>>,
}

#[derive(Deserialize)]
struct LooseTable {
    headers: Vec<String>,
    rows: Vec<Vec<String>>,
    #[serde(default)]
    metadata: BTreeMap<String, String>,
}

#[derive(Deserialize)]
struct LooseAlignment {
    phrase: Span,
    cells: Vec<Vec<i64>>,
}

/// Validates one parsed JSON object. Returns every problem found, not just
/// the first.
pub fn validate_value(line: usize, value: &Value) -> Result<QAInstance, Vec<ValidationError>> {
    let id = value.get("id").and_then(Value::as_str).map(str::to_string);
    let err = |field: &str, message: String| ValidationError {
        line,
        id: id.clone(),
        field: field.to_string(),
        message,
    };
    let loose: LooseInstance = serde_json::from_value(value.clone())
        .map_err(|e| vec![err(&schema_field(&e.to_string()), e.to_string())])?;

    let mut errors = Vec::new();
    if loose.id.trim().is_empty() {
        errors.push(err("id", "empty id".into()));
    }
    let dataset = loose
        .dataset
        .parse::<Dataset>()
        .map_err(|m| errors.push(err("dataset", m)))
        .ok();
    let split = match loose.split.as_str() {
        "gold" => Some(Split::Gold),
        "silver" => Some(Split::Silver),
        other => {
            errors.push(err("split", format!("unknown split `{other}`")));
            None
        }
    };
    if loose.question.trim().is_empty() {
        errors.push(err("question", "empty question".into()));
    }
    if loose.answer.trim().is_empty() {
        errors.push(err("answer", "empty answer".into()));
    }
    let table = Table::with_metadata(loose.table.headers, loose.table.rows, loose.table.metadata)
        .map_err(|e| errors.push(err("table", e.to_string())))
        .ok();

    let mut gold = None;
    if let Some(raw) = loose.gold {
        let mut aligned = Vec::with_capacity(raw.len());
        for (k, a) in raw.into_iter().enumerate() {
            if let Err(m) = a.phrase.check(&loose.answer) {
                errors.push(err(&format!("gold[{k}].phrase"), m));
            }
            if a.cells.is_empty() {
                errors.push(err(&format!("gold[{k}].cells"), "no cells".into()));
            }
            let mut cells = AttributionSet::new();
            for (m, pair) in a.cells.iter().enumerate() {
                let field = format!("gold[{k}].cells[{m}]");
                let &[r, c] = pair.as_slice() else {
                    errors.push(err(&field, format!("expected [row, col], got {pair:?}")));
                    continue;
                };
                if r < 0 || c < 0 {
                    errors.push(err(&field, format!("negative coordinate [{r}, {c}]")));
                    continue;
                }
                let cell = CellRef::new(r as usize, c as usize);
                if let Some(t) = &table {
                    if let Err(e) = t.check(cell) {
                        errors.push(err(&field, e.to_string()));
                        continue;
                    }
                }
                cells.insert(cell);
            }
            aligned.push(PhraseAlignment {
                phrase: a.phrase,
                cells,
            });
        }
        gold = Some(aligned);
    }
    if split == Some(Split::Gold) && gold.as_ref().is_none_or(|g| g.is_empty()) {
        errors.push(err("gold", "gold split requires phrase alignments".into()));
    }

    match (errors.is_empty(), dataset, split, table) {
        (true, Some(dataset), Some(split), Some(table)) => Ok(QAInstance {
            id: loose.id,
            dataset,
            split,
            table,
            question: loose.question,
            answer: loose.answer,
            gold,
        }),
        _ => Err(errors),
    }
}

fn schema_field(message: &str) -> String {
    // serde_json reports "missing field `x`" / "unknown variant" etc.
    message
        .split('`')
        .nth(1)
        .filter(|_| message.starts_with("missing field"))
        .unwrap_or("<schema>")
        .to_string()
}

/// Validates every line of a reader. Blank lines are skipped.
pub fn load_from_reader<R: BufRead>(reader: R, split: SplitFilter) -> std::io::Result<LoadReport> {
    let mut report = LoadReport::default();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = match serde_json::from_str(&line) {
            Ok(v) => v,
            Err(e) => {
                report.errors.push(ValidationError {
                    line: line_no,
                    id: None,
                    field: "<json>".into(),
                    message: e.to_string(),
                });
                continue;
            }
        };
        match validate_value(line_no, &value) {
            Ok(inst) => {
                if !seen.insert(inst.id.clone()) {
                    report.errors.push(ValidationError {
                        line: line_no,
                        id: Some(inst.id.clone()),
                        field: "id".into(),
                        message: "duplicate id".into(),
                    });
                } else if split.admits(inst.split) {
                    report.instances.push(inst);
                }
            }
            Err(errs) => report.errors.extend(errs),
        }
    }
    Ok(report)
}

pub fn load_dataset(path: &Path, split: SplitFilter) -> Result<LoadReport, DatasetError> {
    let io = |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = fs::File::open(path).map_err(io)?;
    load_from_reader(BufReader::new(file), split).map_err(io)
}

/// Canonical single-line JSON with sorted keys.
pub fn to_canonical_json(instance: &QAInstance) -> String {
    let value = serde_json::to_value(instance).expect("instances always serialize");
    serde_json::to_string(&value).expect("values always serialize")
}

pub fn write_jsonl<'a, W: Write>(
    mut out: W,
    instances: impl IntoIterator<Item = &'a QAInstance>,
) -> std::io::Result<()> {
    for inst in instances {
        writeln!(out, "{}", to_canonical_json(inst))?;
    }
    Ok(())
}

pub fn save_dataset(path: &Path, instances: &[QAInstance]) -> Result<(), DatasetError> {
    let io = |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = fs::File::create(path).map_err(io)?;
    let mut w = std::io::BufWriter::new(file);
    write_jsonl(&mut w, instances).map_err(io)?;
    w.flush().map_err(io)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: Dataset,
    /// Relative paths resolve against the manifest's directory.
    pub path: PathBuf,
    pub gold_count: usize,
    pub silver_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub datasets: Vec<ManifestEntry>,
    #[serde(skip)]
    base: PathBuf,
}

impl DatasetManifest {
    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut m: DatasetManifest =
            serde_json::from_str(&text).map_err(|e| DatasetError::Manifest {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?;
        m.base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        Ok(m)
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        if entry.path.is_absolute() {
            entry.path.clone()
        } else {
            self.base.join(&entry.path)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CountMismatch {
    pub dataset: Dataset,
    pub split: Split,
    pub expected: usize,
    pub found: usize,
}

/// Loads every manifest entry and compares on-disk split counts with the
/// declared ones.
pub fn check_manifest(
    manifest: &DatasetManifest,
) -> Result<(Vec<LoadReport>, Vec<CountMismatch>), DatasetError> {
    let mut reports = Vec::new();
    let mut mismatches = Vec::new();
    for entry in &manifest.datasets {
        let report = load_dataset(&manifest.resolve(entry), SplitFilter::All)?;
        let count = |s: Split| {
            report
                .instances
                .iter()
                .filter(|i| i.dataset == entry.name && i.split == s)
                .count()
        };
        for (split, expected) in [(Split::Gold, entry.gold_count), (Split::Silver, entry.silver_count)] {
            let found = count(split);
            if found != expected {
                mismatches.push(CountMismatch {
                    dataset: entry.name,
                    split,
                    expected,
                    found,
                });
            }
        }
        reports.push(report);
    }
    Ok((reports, mismatches))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Distribution {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub median: f64,
}

impl Distribution {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = if n % 2 == 1 {
            v[n / 2]
        } else {
            (v[n / 2 - 1] + v[n / 2]) / 2.0
        };
        Some(Distribution {
            min: v[0],
            max: v[n - 1],
            mean: v.iter().sum::<f64>() / n as f64,
            median,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetStats {
    pub dataset: Dataset,
    pub total: usize,
    pub gold: usize,
    pub silver: usize,
    pub table_rows: Distribution,
    pub table_cols: Distribution,
    pub answer_chars: Distribution,
    pub answer_words: Distribution,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusStats {
    pub datasets: Vec<DatasetStats>,
    pub total: usize,
}

/// Per-dataset split counts and size distributions, ordered by dataset.
pub fn stats(instances: &[QAInstance]) -> Result<CorpusStats, DatasetError> {
    if instances.is_empty() {
        return Err(DatasetError::Empty);
    }
    let present: BTreeSet<Dataset> = instances.iter().map(|i| i.dataset).collect();
    let datasets = present
        .into_iter()
        .map(|d| {
            let group: Vec<&QAInstance> = instances.iter().filter(|i| i.dataset == d).collect();
            let dist = |f: &dyn Fn(&QAInstance) -> f64| {
                Distribution::of(&group.iter().map(|i| f(i)).collect::<Vec<_>>())
                    .expect("group is non-empty")
            };
            DatasetStats {
                dataset: d,
                total: group.len(),
                gold: group.iter().filter(|i| i.split == Split::Gold).count(),
                silver: group.iter().filter(|i| i.split == Split::Silver).count(),
                table_rows: dist(&|i| i.table.n_rows() as f64),
                table_cols: dist(&|i| i.table.n_cols() as f64),
                answer_chars: dist(&|i| i.answer.chars().count() as f64),
                answer_words: dist(&|i| i.answer.split_whitespace().count() as f64),
            }
        })
        .collect();
    Ok(CorpusStats {
        datasets,
        total: instances.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(extra: &str) -> String {
        format!(
            r#"{{"id":"x1","dataset":"FetaQA","split":"gold","table":{{"headers":["a","b"],"rows":[["1","2"],["3","4"]]}},"question":"q?","answer":"the 4"{extra}}}"#
        )
    }

    fn load(text: &str) -> LoadReport {
        load_from_reader(text.as_bytes(), SplitFilter::All).unwrap()
    }

    #[test]
    fn accepts_valid_instance() {
        let r = load(&line(r#","gold":[{"phrase":{"start":4,"end":5,"text":"4"},"cells":[[1,1]]}]"#));
        assert!(r.errors.is_empty(), "{:?}", r.errors);
        assert_eq!(r.instances.len(), 1);
        assert_eq!(r.instances[0].gold_cells().unwrap().len(), 1);
    }

    #[test]
    fn rejects_out_of_bounds_gold() {
        let r = load(&line(r#","gold":[{"phrase":{"start":4,"end":5,"text":"4"},"cells":[[2,1]]}]"#));
        assert!(r.instances.is_empty());
        assert_eq!(r.errors.len(), 1);
        assert_eq!(r.errors[0].field, "gold[0].cells[0]");
        assert_eq!(r.errors[0].id.as_deref(), Some("x1"));
    }

    #[test]
    fn rejects_missing_gold_on_gold_split() {
        let r = load(&line(""));
        assert_eq!(r.errors.len(), 1);
        assert_eq!(r.errors[0].field, "gold");
    }

    #[test]
    fn missing_field_is_named() {
        let r = load(r#"{"id":"y","dataset":"ToTTo","split":"silver","question":"q","answer":"a"}"#);
        assert_eq!(r.errors[0].field, "table");
    }

    #[test]
    fn split_filter_applies() {
        let silver = line("").replace("\"gold\"", "\"silver\"");
        let r = load_from_reader(silver.as_bytes(), SplitFilter::Gold).unwrap();
        assert!(r.instances.is_empty() && r.errors.is_empty());
    }

    #[test]
    fn canonical_json_is_sorted_and_stable() {
        let text = line(r#","gold":[{"phrase":{"start":4,"end":5,"text":"4"},"cells":[[1,1]]}]"#);
        let inst = load(&text).instances.remove(0);
        let canon = to_canonical_json(&inst);
        assert!(canon.starts_with(r#"{"answer":"the 4","dataset":"FetaQA","gold":[{"cells":[[1,1]],"phrase""#));
        let again = load(&canon).instances.remove(0);
        assert_eq!(to_canonical_json(&again), canon);
    }

    #[test]
    fn stats_counts_and_distributions() {
        let text = line(r#","gold":[{"phrase":{"start":4,"end":5,"text":"4"},"cells":[[1,1]]}]"#);
        let inst = load(&text).instances.remove(0);
        let s = stats(std::slice::from_ref(&inst)).unwrap();
        assert_eq!(s.total, 1);
        assert_eq!((s.datasets[0].gold, s.datasets[0].silver), (1, 0));
        assert_eq!(s.datasets[0].answer_words.median, 2.0);
        assert!(matches!(stats(&[]), Err(DatasetError::Empty)));
    }

    #[test]
    fn distribution_median_even() {
        let d = Distribution::of(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!((d.min, d.max, d.mean, d.median), (1.0, 4.0, 2.5, 2.5));
    }
}
