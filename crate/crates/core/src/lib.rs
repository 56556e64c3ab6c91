//! Core data model for cell-level table QA attribution: tables and
//! coordinates, the filter-expression language used to prune rows, set-based
//! precision/recall metrics, and benchmark-format dataset handling.

pub mod coerce;
pub mod datasets;
pub mod error;
pub mod filter;
pub mod import;
pub mod metrics;
pub mod table;
pub mod types;

pub use coerce::{coerce_cell, TypedValue};
pub use error::TableError;
pub use filter::{argmax_rows, evaluate_filter, parse_filter, FilterError, FilterExpr};
pub use metrics::{aggregate, cell_prf, col_prf, row_prf, PRScore};
pub use table::{prune, render_table, AttributionSet, CellRef, PrunedTable, RenderFormat, Table};
pub use types::{Dataset, PhraseAlignment, QAInstance, Span, Split, SplitFilter};
