use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use cellattr_core::{AttributionSet, PhraseAlignment};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSelection {
    /// Columns whose values appear in the answer.
    pub explicit: BTreeSet<usize>,
    /// Columns needed only for intermediate steps.
    pub implicit: BTreeSet<usize>,
}

impl ColumnSelection {
    pub fn all(&self) -> BTreeSet<usize> {
        self.explicit.union(&self.implicit).copied().collect()
    }

    pub fn everything(n_cols: usize) -> Self {
        ColumnSelection {
            explicit: (0..n_cols).collect(),
            implicit: BTreeSet::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubQuestion {
    pub text: String,
    /// Declarative restatement checked against the answer.
    pub derived_fact: String,
    /// `None` until the entailment check has run.
    pub verified: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubAttribution {
    pub sub_question: SubQuestion,
    /// Original-table coordinates.
    pub cells: AttributionSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PipelineVariant {
    Standard,
    DecomposeBeforePrune,
    PerSubquery,
    NoPruning,
    NoDecomposition,
}

impl PipelineVariant {
    pub const ALL: [PipelineVariant; 5] = [
        PipelineVariant::Standard,
        PipelineVariant::DecomposeBeforePrune,
        PipelineVariant::PerSubquery,
        PipelineVariant::NoPruning,
        PipelineVariant::NoDecomposition,
    ];

    pub fn slug(self) -> &'static str {
        match self {
            PipelineVariant::Standard => "standard",
            PipelineVariant::DecomposeBeforePrune => "decompose-before-prune",
            PipelineVariant::PerSubquery => "per-subquery",
            PipelineVariant::NoPruning => "no-pruning",
            PipelineVariant::NoDecomposition => "no-decomposition",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            PipelineVariant::Standard => "Full pipeline",
            PipelineVariant::DecomposeBeforePrune => "Decomposition before pruning",
            PipelineVariant::PerSubquery => "One sub-question at a time",
            PipelineVariant::NoPruning => "Without table pruning",
            PipelineVariant::NoDecomposition => "Without query decomposition",
        }
    }
}

impl fmt::Display for PipelineVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for PipelineVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        PipelineVariant::ALL
            .into_iter()
            .find(|v| v.slug() == norm || format!("{v:?}").eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                let names: Vec<_> = PipelineVariant::ALL.iter().map(|v| v.slug()).collect();
                format!("unknown variant `{s}` (expected one of {})", names.join(", "))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionResult {
    pub instance_id: String,
    pub final_cells: AttributionSet,
    pub phrase_alignments: Vec<PhraseAlignment>,
    pub columns: ColumnSelection,
    pub filter_text: String,
    pub kept_rows: BTreeSet<usize>,
    pub sub_attributions: Vec<SubAttribution>,
    pub variant: PipelineVariant,
    pub diagnostics: Vec<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_names() {
        for v in PipelineVariant::ALL {
            assert_eq!(v.slug().parse::<PipelineVariant>().unwrap(), v);
            assert_eq!(format!("{v:?}").parse::<PipelineVariant>().unwrap(), v);
        }
        assert_eq!("per_subquery".parse::<PipelineVariant>().unwrap(), PipelineVariant::PerSubquery);
        assert!("nope".parse::<PipelineVariant>().is_err());
    }

    #[test]
    fn selection_union() {
        let s = ColumnSelection {
            explicit: [0, 2].into(),
            implicit: [1].into(),
        };
        assert_eq!(s.all(), [0, 1, 2].into());
        assert_eq!(ColumnSelection::everything(2).all(), [0, 1].into());
    }
}
