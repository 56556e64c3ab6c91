//! Small tables from worked examples, plus a generator of synthetic
//! instances with exact gold alignments.

use cellattr_core::table::{AttributionSet, Table};
use cellattr_core::types::{Dataset, PhraseAlignment, QAInstance, Span, Split};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::backends::ScriptedBackend;

pub fn energy_table() -> Table {
    Table::from_strs(
        &["Source", "Cost", "Efficiency", "Scalability"],
        &[
            &["Solar Power", "30–50", "15–20", "4"],
            &["Wind Power", "20–40", "30–45", "5"],
            &["Hydropower", "40–70", "70–90", "3"],
            &["Geothermal", "50–80", "90+", "2"],
        ],
    )
    .expect("fixture table is rectangular")
}

pub const ENERGY_QUESTION: &str = "Among renewable sources costing ≤ 50/MWh and scalability ≥ 3, which is most efficient, and what is its efficiency?";
pub const ENERGY_ANSWER: &str = "Wind Power, 30–45% efficiency.";

fn align(answer: &str, phrase: &str, cells: &[(usize, usize)]) -> PhraseAlignment {
    PhraseAlignment {
        phrase: Span::locate(answer, phrase, 0).expect("phrase occurs in the answer"),
        cells: cells.iter().copied().collect(),
    }
}

pub fn energy_instance() -> QAInstance {
    QAInstance {
        id: "energy-1".into(),
        dataset: Dataset::Other,
        split: Split::Gold,
        table: energy_table(),
        question: ENERGY_QUESTION.into(),
        answer: ENERGY_ANSWER.into(),
        gold: Some(vec![
            align(ENERGY_ANSWER, "Wind Power", &[(1, 0)]),
            align(ENERGY_ANSWER, "30–45%", &[(1, 2)]),
        ]),
    }
}

/// Cells the full reasoning chain for the energy question touches: the
/// filter columns of both qualifying rows plus the answer cells.
pub fn energy_expected_cells() -> AttributionSet {
    [(1, 0), (0, 1), (1, 1), (1, 2), (0, 3), (1, 3)].into_iter().collect()
}

/// Model replies walking the energy question through the standard pipeline.
pub fn energy_script() -> ScriptedBackend {
    ScriptedBackend::new()
        .reply("column_relevance", r#"{"explicit": [0, 2], "implicit": [1, 3]}"#)
        .reply("evidence_span", r#"{"filter": "WHERE Cost <= 50 AND Scalability >= 3"}"#)
        .reply(
            "query_decomposition",
            r#"{"subquestions": [
                {"question": "Which sources cost at most 50/MWh?", "fact": "Wind Power costs at most 50/MWh."},
                {"question": "Which of those have scalability of at least 3?", "fact": "Wind Power has scalability of at least 3."},
                {"question": "Which remaining source is most efficient, and how efficient is it?", "fact": "Wind Power is the most efficient, at 30–45%."}
            ]}"#,
        )
        .reply("entailment", r#"{"entailed": true, "score": 0.97}"#)
        .reply("entailment", r#"{"entailed": true, "score": 0.95}"#)
        .reply("entailment", r#"{"entailed": true, "score": 0.99}"#)
        .reply(
            "subquery_attribution",
            r#"{"attributions": [
                {"id": 0, "cells": [[0, 1], [1, 1]]},
                {"id": 1, "cells": [[0, 3], [1, 3]]},
                {"id": 2, "cells": [[1, 0], [1, 2]]}
            ]}"#,
        )
        .reply(
            "final_attribution",
            r#"{"alignments": [{"phrase": "Wind Power", "cells": [[1, 0]]}, {"phrase": "30–45%", "cells": [[1, 2]]}]}"#,
        )
}

pub fn films_table() -> Table {
    Table::from_strs(
        &["Year", "Film", "Role", "Language"],
        &[
            &["2002", "Yathrakarude Sradakku", "--", "Malayalam"],
            &["2012", "Kadhalil Sodhapuvadhu Yeppadi", "Cathy", "Tamil"],
            &["2012", "Love Failure", "Cathy", "Telugu"],
            &["2012", "Nanban", "Jeeva's Wife", "Tamil"],
            &["2012", "Pizza", "Smitha", "Tamil"],
            &["2013", "Swamy Ra Ra", "Bhanu", "Telugu"],
        ],
    )
    .expect("fixture table is rectangular")
}

pub const FILMS_QUESTION: &str = "In which films did Pooja Ramachandran play the role of Cathy?";
pub const FILMS_ANSWER: &str =
    "Pooja Ramachandran starred as Cathy in Kadhalil Sodhapuvadhu Yeppadi and its Telugu version Love Failure.";

/// The relevant cells of the films example, in data-row coordinates.
pub fn films_relevant_cells() -> AttributionSet {
    [(1, 1), (1, 2), (2, 1), (2, 2), (2, 3)].into_iter().collect()
}

/// The over-inclusive labelling of the films example: the relevant cells
/// plus same-year cells and an unrelated film.
pub fn films_noisy_cells() -> AttributionSet {
    [(1, 0), (1, 1), (1, 2), (2, 0), (2, 1), (2, 2), (2, 3), (4, 0), (4, 1)]
        .into_iter()
        .collect()
}

pub fn films_instance() -> QAInstance {
    let a = FILMS_ANSWER;
    let cathy = Span::locate(a, "Cathy", 0).expect("phrase occurs");
    QAInstance {
        id: "fetaqa-films".into(),
        dataset: Dataset::FetaQA,
        split: Split::Gold,
        table: films_table(),
        question: FILMS_QUESTION.into(),
        answer: a.into(),
        gold: Some(vec![
            PhraseAlignment {
                phrase: cathy,
                cells: [(1, 2), (2, 2)].into_iter().collect(),
            },
            align(a, "Kadhalil Sodhapuvadhu Yeppadi", &[(1, 1)]),
            align(a, "Telugu", &[(2, 3)]),
            align(a, "Love Failure", &[(2, 1)]),
        ]),
    }
}

pub fn events_table() -> Table {
    Table::from_strs(
        &["Event_Name", "Start_Time", "End_Time", "Venue"],
        &[
            &["Marathon", "07:00:00", "09:10:00", "Riverside Park"],
            &["Aerospace", "14:00:00", "14:00:50", "Hangar 3"],
            &["Regatta", "10:30:00", "12:45:00", "North Harbour"],
        ],
    )
    .expect("fixture table is rectangular")
}

const NAMES: &[&str] = &[
    "Alder", "Birch", "Cedar", "Dogwood", "Elm", "Fir", "Ginkgo", "Hazel", "Ironwood", "Juniper", "Katsura", "Larch",
];
const WORDS: &[&str] = &["amber", "cobalt", "crimson", "ivory", "jade", "ochre", "slate", "teal"];
const HEADERS: &[&str] = &["Height", "Weight", "Score", "Colour", "Rank", "Region", "Age", "Grade"];

/// A random table with a distinct `Name` column and an answer reporting one
/// or two attributes of one row. Every phrase is aligned to exactly the cell
/// it quotes.
pub fn synthetic_instance(rng: &mut impl Rng, id: &str) -> QAInstance {
    let n_rows = rng.random_range(2..=7);
    let n_cols = rng.random_range(2..=5);
    let mut names: Vec<&str> = NAMES.to_vec();
    names.shuffle(rng);
    let mut headers: Vec<&str> = HEADERS.to_vec();
    headers.shuffle(rng);
    let mut header_row = vec!["Name".to_string()];
    header_row.extend(headers[..n_cols - 1].iter().map(|h| h.to_string()));
    let numeric: Vec<bool> = (0..n_cols).map(|c| c > 0 && rng.random_bool(0.6)).collect();
    let rows: Vec<Vec<String>> = (0..n_rows)
        .map(|r| {
            (0..n_cols)
                .map(|c| match c {
                    0 => names[r].to_string(),
                    _ if numeric[c] => rng.random_range(1..1000).to_string(),
                    _ => WORDS[rng.random_range(0..WORDS.len())].to_string(),
                })
                .collect()
        })
        .collect();
    let mut table = Table::new(header_row.clone(), rows.clone()).expect("rectangular by construction");
    table.set_metadata("title", format!("Registry {id}"));

    let row = rng.random_range(0..n_rows);
    let mut cols: Vec<usize> = (1..n_cols).collect();
    cols.shuffle(rng);
    cols.truncate(rng.random_range(1..=cols.len().min(2)));
    cols.sort_unstable();

    let mut answer = String::new();
    let mut gold = Vec::new();
    let mut push_phrase = |answer: &mut String, text: &str, cell: (usize, usize)| {
        let start = answer.chars().count();
        answer.push_str(text);
        gold.push(PhraseAlignment {
            phrase: Span {
                start,
                end: start + text.chars().count(),
                text: text.to_string(),
            },
            cells: [cell].into_iter().collect(),
        });
    };
    push_phrase(&mut answer, &rows[row][0], (row, 0));
    answer.push_str(" has");
    for (i, &c) in cols.iter().enumerate() {
        if i > 0 {
            answer.push_str(" and");
        }
        answer.push_str(&format!(" {} ", header_row[c].to_lowercase()));
        push_phrase(&mut answer, &rows[row][c], (row, c));
    }
    answer.push('.');
    let asked: Vec<String> = cols.iter().map(|&c| header_row[c].to_lowercase()).collect();
    let question = format!("In Registry {id}, what is the {} of {}?", asked.join(" and "), rows[row][0]);
    let dataset = [Dataset::ToTTo, Dataset::FetaQA, Dataset::AITQA][rng.random_range(0..3)];
    QAInstance {
        id: id.to_string(),
        dataset,
        split: Split::Gold,
        table,
        question,
        answer,
        gold: Some(gold),
    }
}

pub fn synthetic_corpus(rng: &mut impl Rng, n: usize) -> Vec<QAInstance> {
    (0..n).map(|i| synthetic_instance(rng, &format!("syn-{i:04}"))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fixtures_are_consistent() {
        for inst in [energy_instance(), films_instance()] {
            for al in inst.gold.as_ref().unwrap() {
                al.phrase.check(&inst.answer).unwrap();
                al.cells.validate(&inst.table).unwrap();
            }
        }
        assert_eq!(films_instance().gold_cells().unwrap(), films_relevant_cells());
        assert!(films_relevant_cells().is_subset(&films_noisy_cells()));
        assert_eq!(films_table().cell((4, 1).into()), Some("Pizza"));
    }

    #[test]
    fn synthetic_instances_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for inst in synthetic_corpus(&mut rng, 200) {
            let gold = inst.gold.as_ref().unwrap();
            assert!(gold.len() >= 2);
            for al in gold {
                al.phrase.check(&inst.answer).unwrap();
                al.cells.validate(&inst.table).unwrap();
                assert_eq!(inst.table.cell(*al.cells.iter().next().unwrap()), Some(al.phrase.text.as_str()));
            }
        }
    }
}
