//! Row, column and cell precision/recall of attribution results.

use std::collections::{BTreeMap, HashMap};

use cellattr_core::datasets::load_dataset;
use cellattr_core::metrics::{aggregate, phrase_match_rate, score_all, MacroAverage};
use cellattr_core::types::{QAInstance, SplitFilter};
use cellattr_pipeline::AttributionResult;
use serde::Serialize;

use crate::args::EvaluateArgs;
use crate::output::{pct, read_jsonl, write_json, write_text};
use crate::{Outcome, UsageError};

pub const EMPTY_SET_RULE: &str =
    "empty pred and gold: P=R=1; empty pred only: P=R=0; empty gold only: P=0, R=1";

#[derive(Debug, Clone, Serialize)]
pub struct GroupScores {
    pub dataset: String,
    pub split: String,
    pub n: usize,
    pub row: MacroAverage,
    pub col: MacroAverage,
    pub cell: MacroAverage,
    /// Mean share of gold phrase alignments reproduced exactly.
    pub phrase_match: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Excluded {
    pub instance_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Scored {
    pub groups: Vec<GroupScores>,
    pub overall: Option<GroupScores>,
    pub excluded: Vec<Excluded>,
}

fn group(dataset: String, split: String, items: &[(&AttributionResult, &QAInstance)]) -> GroupScores {
    let mut rows = Vec::new();
    let mut cols = Vec::new();
    let mut cells = Vec::new();
    let mut phrase = Vec::new();
    for (r, inst) in items {
        let gold = inst.gold_cells().expect("only labelled instances are scored");
        let g = score_all(&r.final_cells, &gold);
        rows.push(g.row);
        cols.push(g.col);
        cells.push(g.cell);
        if let Some(p) = phrase_match_rate(&r.phrase_alignments, inst.gold.as_deref().unwrap_or_default()) {
            phrase.push(p);
        }
    }
    let avg = |s: &[_]| aggregate(s).expect("groups are non-empty");
    GroupScores {
        dataset,
        split,
        n: items.len(),
        row: avg(&rows),
        col: avg(&cols),
        cell: avg(&cells),
        phrase_match: (!phrase.is_empty()).then(|| phrase.iter().sum::<f64>() / phrase.len() as f64),
    }
}

/// Scores results against the labelled instances they name. Results without
/// a labelled instance and instances without a result are listed as excluded.
pub fn score_results(results: &[AttributionResult], instances: &[QAInstance]) -> Scored {
    let by_id: HashMap<&str, &QAInstance> = instances.iter().map(|i| (i.id.as_str(), i)).collect();
    let mut excluded = Vec::new();
    let mut pairs = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for r in results {
        match by_id.get(r.instance_id.as_str()) {
            None => excluded.push(Excluded {
                instance_id: r.instance_id.clone(),
                reason: "not in the dataset".into(),
            }),
            Some(i) if i.gold.is_none() => excluded.push(Excluded {
                instance_id: r.instance_id.clone(),
                reason: "no gold labels".into(),
            }),
            Some(_) if !seen.insert(r.instance_id.as_str()) => excluded.push(Excluded {
                instance_id: r.instance_id.clone(),
                reason: "duplicate result".into(),
            }),
            Some(i) => pairs.push((r, *i)),
        }
    }
    for i in instances {
        if !results.iter().any(|r| r.instance_id == i.id) {
            excluded.push(Excluded {
                instance_id: i.id.clone(),
                reason: "no result".into(),
            });
        }
    }
    for e in &excluded {
        log::warn!("excluded {}: {}", e.instance_id, e.reason);
    }
    let mut grouped: BTreeMap<(String, String), Vec<(&AttributionResult, &QAInstance)>> = BTreeMap::new();
    for &(r, i) in &pairs {
        grouped
            .entry((i.dataset.to_string(), i.split.to_string()))
            .or_default()
            .push((r, i));
    }
    let groups = grouped.into_iter().map(|((d, s), items)| group(d, s, &items)).collect();
    let overall = (!pairs.is_empty()).then(|| group("all".into(), "all".into(), &pairs));
    Scored {
        groups,
        overall,
        excluded,
    }
}

#[derive(Serialize)]
struct EvaluationReport {
    command: &'static str,
    averaging: &'static str,
    empty_sets: &'static str,
    groups: Vec<GroupScores>,
    overall: Option<GroupScores>,
    excluded: Vec<Excluded>,
}

pub fn tsv(groups: &[GroupScores], overall: Option<&GroupScores>) -> String {
    let mut out = String::from("dataset\tsplit\tn\trow_p\trow_r\tcol_p\tcol_r\tcell_p\tcell_r\tphrase_match\n");
    for g in groups.iter().chain(overall) {
        out.push_str(&format!("{}\t{}\t{}", g.dataset, g.split, g.n));
        for m in [g.row, g.col, g.cell] {
            out.push_str(&format!("\t{}\t{}", pct(m.precision), pct(m.recall)));
        }
        out.push_str(&format!("\t{}\n", g.phrase_match.map_or("-".into(), pct)));
    }
    out
}

pub fn run(args: &EvaluateArgs) -> anyhow::Result<Outcome> {
    let results: Vec<AttributionResult> = read_jsonl(&args.results)?;
    if results.is_empty() {
        return Err(UsageError(format!("{} contains no results", args.results.display())).into());
    }
    let loaded = load_dataset(&args.dataset, SplitFilter::All)?;
    for e in &loaded.errors {
        log::warn!("rejected {e}");
    }
    let scored = score_results(&results, &loaded.instances);
    if scored.overall.is_none() {
        return Err(UsageError("no result matches a labelled instance".into()).into());
    }
    let table = tsv(&scored.groups, scored.overall.as_ref());
    let problems = scored.excluded.len() + loaded.errors.len();
    let report = EvaluationReport {
        command: "evaluate",
        averaging: "macro",
        empty_sets: EMPTY_SET_RULE,
        groups: scored.groups,
        overall: scored.overall,
        excluded: scored.excluded,
    };
    if let Some(p) = &args.output {
        write_json(p, &report)?;
    }
    if let Some(p) = &args.tsv {
        write_text(p, &table)?;
    }
    print!("{table}");
    Ok(Outcome::from_problems(problems))
}

#[cfg(test)]
mod tests {
    use super::*;
    use cellattr_core::table::{AttributionSet, Table};
    use cellattr_core::types::{Dataset, PhraseAlignment, Span, Split};
    use cellattr_pipeline::{ColumnSelection, PipelineVariant};

    fn instance(id: &str, dataset: Dataset, gold: &[(usize, usize)]) -> QAInstance {
        QAInstance {
            id: id.into(),
            dataset,
            split: Split::Gold,
            table: Table::from_strs(&["A", "B"], &[&["x", "y"], &["z", "w"]]).unwrap(),
            question: "q?".into(),
            answer: "x".into(),
            gold: Some(vec![PhraseAlignment {
                phrase: Span { start: 0, end: 1, text: "x".into() },
                cells: gold.iter().copied().collect(),
            }]),
        }
    }

    fn result(id: &str, cells: &[(usize, usize)]) -> AttributionResult {
        AttributionResult {
            instance_id: id.into(),
            final_cells: cells.iter().copied().collect::<AttributionSet>(),
            phrase_alignments: Vec::new(),
            columns: ColumnSelection::default(),
            filter_text: String::new(),
            kept_rows: Default::default(),
            sub_attributions: Vec::new(),
            variant: PipelineVariant::Standard,
            diagnostics: Vec::new(),
        }
    }

    #[test]
    fn groups_macro_average_per_dataset() {
        let instances = [
            instance("a", Dataset::ToTTo, &[(0, 0)]),
            instance("b", Dataset::ToTTo, &[(0, 0), (1, 1)]),
            instance("c", Dataset::AITQA, &[(1, 0)]),
        ];
        let results = [result("a", &[(0, 0)]), result("b", &[(0, 0)]), result("c", &[(0, 0)])];
        let s = score_results(&results, &instances);
        assert!(s.excluded.is_empty());
        let totto = s.groups.iter().find(|g| g.dataset == "ToTTo").unwrap();
        assert_eq!(totto.n, 2);
        assert_eq!(totto.cell.precision, 1.0);
        assert_eq!(totto.cell.recall, 0.75);
        let all = s.overall.unwrap();
        assert_eq!(all.cell.precision, 2.0 / 3.0);
        assert_eq!(all.col.recall, (1.0 + 0.5 + 1.0) / 3.0);
    }

    #[test]
    fn mismatches_are_excluded_not_scored() {
        let mut unlabelled = instance("u", Dataset::FetaQA, &[]);
        unlabelled.gold = None;
        unlabelled.split = Split::Silver;
        let instances = [instance("a", Dataset::ToTTo, &[(0, 0)]), unlabelled, instance("m", Dataset::ToTTo, &[(0, 0)])];
        let results = [result("a", &[(0, 0)]), result("a", &[]), result("u", &[]), result("ghost", &[])];
        let s = score_results(&results, &instances);
        let reasons: Vec<(&str, &str)> = s.excluded.iter().map(|e| (e.instance_id.as_str(), e.reason.as_str())).collect();
        assert_eq!(
            reasons,
            [("a", "duplicate result"), ("u", "no gold labels"), ("ghost", "not in the dataset"), ("m", "no result")]
        );
        assert_eq!(s.overall.unwrap().n, 1);
    }

    #[test]
    fn tsv_has_a_row_per_group_and_overall() {
        let instances = [instance("a", Dataset::ToTTo, &[(0, 0)])];
        let s = score_results(&[result("a", &[(0, 0), (0, 1)])], &instances);
        let text = tsv(&s.groups, s.overall.as_ref());
        assert_eq!(text.lines().count(), 3);
        assert!(text.contains("ToTTo\tgold\t1\t100.00\t100.00\t50.00\t100.00\t50.00\t100.00\t0.00"), "{text}");
    }
}
