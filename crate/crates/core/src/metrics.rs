//! Row-, column- and cell-level precision and recall against gold attributions.
//!
//! Empty-set conventions:
//!
//! | pred  | gold      | precision | recall |
//! |-------|-----------|-----------|--------|
//! | empty | empty     | 1         | 1      |
//! | empty | non-empty | 0         | 0      |
//! | non-empty | empty | 0         | 1      |
//!
//! Corpus scores are macro averages over instances.

use std::collections::BTreeSet;
use std::hash::Hash;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::table::{AttributionSet, CellRef};
use crate::types::PhraseAlignment;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("cannot aggregate an empty list of scores")]
    EmptyInput,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Support {
    pub pred_size: usize,
    pub gold_size: usize,
    pub intersection: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PRScore {
    pub precision: f64,
    pub recall: f64,
    pub support: Support,
}

impl PRScore {
    pub fn from_support(support: Support) -> Self {
        let Support {
            pred_size,
            gold_size,
            intersection,
        } = support;
        let (precision, recall) = match (pred_size, gold_size) {
            (0, 0) => (1.0, 1.0),
            (0, _) => (0.0, 0.0),
            (_, 0) => (0.0, 1.0),
            (p, g) => (intersection as f64 / p as f64, intersection as f64 / g as f64),
        };
        PRScore {
            precision,
            recall,
            support,
        }
    }
}

fn set_prf<T: Ord + Hash>(pred: &BTreeSet<T>, gold: &BTreeSet<T>) -> PRScore {
    PRScore::from_support(Support {
        pred_size: pred.len(),
        gold_size: gold.len(),
        intersection: pred.intersection(gold).count(),
    })
}

pub fn cell_prf(pred: &AttributionSet, gold: &AttributionSet) -> PRScore {
    set_prf::<CellRef>(pred.as_set(), gold.as_set())
}

/// Scores the row projections of both sets.
pub fn row_prf(pred: &AttributionSet, gold: &AttributionSet) -> PRScore {
    set_prf(&pred.rows(), &gold.rows())
}

/// Scores the column projections of both sets.
pub fn col_prf(pred: &AttributionSet, gold: &AttributionSet) -> PRScore {
    set_prf(&pred.cols(), &gold.cols())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Granular {
    pub row: PRScore,
    pub col: PRScore,
    pub cell: PRScore,
}

pub fn score_all(pred: &AttributionSet, gold: &AttributionSet) -> Granular {
    Granular {
        row: row_prf(pred, gold),
        col: col_prf(pred, gold),
        cell: cell_prf(pred, gold),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacroAverage {
    pub precision: f64,
    pub recall: f64,
    pub n: usize,
}

/// Unweighted mean of per-instance precision and recall.
pub fn aggregate(scores: &[PRScore]) -> Result<MacroAverage, MetricsError> {
    if scores.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let n = scores.len();
    let (p, r) = scores
        .iter()
        .fold((0.0, 0.0), |(p, r), s| (p + s.precision, r + s.recall));
    Ok(MacroAverage {
        precision: p / n as f64,
        recall: r / n as f64,
        n,
    })
}

/// Share of gold phrase alignments reproduced exactly by a prediction: same
/// phrase text (case and surrounding whitespace ignored) with the same cells.
/// `None` when there are no gold alignments.
pub fn phrase_match_rate(pred: &[PhraseAlignment], gold: &[PhraseAlignment]) -> Option<f64> {
    if gold.is_empty() {
        return None;
    }
    let key = |a: &PhraseAlignment| a.phrase.text.trim().to_lowercase();
    let hits = gold
        .iter()
        .filter(|g| pred.iter().any(|p| key(p) == key(g) && p.cells == g.cells))
        .count();
    Some(hits as f64 / gold.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cells(xs: &[(usize, usize)]) -> AttributionSet {
        xs.iter().copied().collect()
    }

    fn feta_pred() -> AttributionSet {
        cells(&[
            (2, 0),
            (2, 1),
            (2, 2),
            (3, 0),
            (3, 1),
            (3, 2),
            (3, 3),
            (5, 0),
            (5, 1),
        ])
    }

    fn feta_gold() -> AttributionSet {
        cells(&[(2, 1), (2, 2), (3, 1), (3, 2), (3, 3)])
    }

    #[test]
    fn noisy_fetaqa_cells() {
        let s = cell_prf(&feta_pred(), &feta_gold());
        assert_eq!(s.support.intersection, 5);
        assert!((s.precision - 5.0 / 9.0).abs() < 1e-12);
        assert_eq!(s.recall, 1.0);
    }

    #[test]
    fn noisy_fetaqa_rows_and_cols() {
        let r = row_prf(&feta_pred(), &feta_gold());
        assert!((r.precision - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.recall, 1.0);
        let c = col_prf(&feta_pred(), &feta_gold());
        assert!((c.precision - 0.75).abs() < 1e-12);
        assert_eq!(c.recall, 1.0);
    }

    #[test]
    fn identity_and_disjoint() {
        let g = feta_gold();
        let s = cell_prf(&g, &g);
        assert_eq!((s.precision, s.recall), (1.0, 1.0));
        let s = cell_prf(&cells(&[(0, 0)]), &cells(&[(1, 1)]));
        assert_eq!((s.precision, s.recall), (0.0, 0.0));
    }

    #[test]
    fn row_projection() {
        let s = row_prf(&cells(&[(1, 0), (1, 2)]), &cells(&[(1, 3)]));
        assert_eq!((s.precision, s.recall), (1.0, 1.0));
        let s = row_prf(&cells(&[(0, 0)]), &cells(&[(1, 0)]));
        assert_eq!((s.precision, s.recall), (0.0, 0.0));
    }

    #[test]
    fn col_subset() {
        let s = col_prf(&cells(&[(0, 1)]), &cells(&[(0, 1), (0, 2)]));
        assert_eq!(s.precision, 1.0);
        assert!(s.recall < 1.0);
    }

    #[test]
    fn empty_conventions() {
        let e = AttributionSet::new();
        let g = cells(&[(0, 0)]);
        let s = cell_prf(&e, &e);
        assert_eq!((s.precision, s.recall), (1.0, 1.0));
        let s = cell_prf(&e, &g);
        assert_eq!((s.precision, s.recall), (0.0, 0.0));
        let s = cell_prf(&g, &e);
        assert_eq!((s.precision, s.recall), (0.0, 1.0));
    }

    #[test]
    fn aggregate_macro() {
        let one = cell_prf(&cells(&[(0, 0)]), &cells(&[(0, 0)]));
        let zero = cell_prf(&cells(&[(0, 0)]), &cells(&[(1, 1)]));
        let m = aggregate(&[one, zero]).unwrap();
        assert_eq!((m.precision, m.recall, m.n), (0.5, 0.5, 2));
        let m = aggregate(&[one]).unwrap();
        assert_eq!((m.precision, m.recall), (one.precision, one.recall));
        assert_eq!(aggregate(&[]), Err(MetricsError::EmptyInput));
    }
}
