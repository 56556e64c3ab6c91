use thiserror::Error;

use crate::table::CellRef;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TableError {
    #[error("table has no columns")]
    NoColumns,
    #[error("table has no data rows")]
    NoRows,
    #[error("row {row} has {found} cells, expected {expected}")]
    Ragged {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("cell {cell} is outside a {n_rows}x{n_cols} table")]
    OutOfBounds {
        cell: CellRef,
        n_rows: usize,
        n_cols: usize,
    },
    #[error("row index {row} out of range (table has {n_rows} rows)")]
    RowOutOfBounds { row: usize, n_rows: usize },
    #[error("column index {col} out of range (table has {n_cols} columns)")]
    ColOutOfBounds { col: usize, n_cols: usize },
    #[error("empty selection ({rows} rows, {cols} columns)")]
    EmptySelection { rows: usize, cols: usize },
}
