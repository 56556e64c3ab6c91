//! Tables, cell coordinates and pruned views.
//!
//! Coordinates are zero-based and refer to data rows only; the header row is
//! not addressable. A [`PrunedTable`] keeps the maps needed to translate any
//! coordinate of the view back into the table it was cut from.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::TableError;

/// Rectangular grid of cell strings with one header per column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawTable", into = "RawTable")]
pub struct Table {
    headers: Vec<String>,
    rows: Vec<Vec<String>>,
    metadata: BTreeMap<String, String>,
}

/// Wire shape of a table: `{headers, rows, metadata}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawTable {
    headers: Vec<String>,
    rows: Vec<Vec<String>>,
    #[serde(default)]
    metadata: BTreeMap<String, String>,
}

impl TryFrom<RawTable> for Table {
    type Error = TableError;

    fn try_from(raw: RawTable) -> Result<Self, Self::Error> {
        Table::with_metadata(raw.headers, raw.rows, raw.metadata)
    }
}

impl From<Table> for RawTable {
    fn from(t: Table) -> Self {
        RawTable {
            headers: t.headers,
            rows: t.rows,
            metadata: t.metadata,
        }
    }
}

impl Table {
    pub fn new(headers: Vec<String>, rows: Vec<Vec<String>>) -> Result<Self, TableError> {
        Self::with_metadata(headers, rows, BTreeMap::new())
    }

    pub fn with_metadata(
        headers: Vec<String>,
        rows: Vec<Vec<String>>,
        metadata: BTreeMap<String, String>,
    ) -> Result<Self, TableError> {
        if headers.is_empty() {
            return Err(TableError::NoColumns);
        }
        if rows.is_empty() {
            return Err(TableError::NoRows);
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != headers.len() {
                return Err(TableError::Ragged {
                    row: i,
                    expected: headers.len(),
                    found: row.len(),
                });
            }
        }
        Ok(Table {
            headers,
            rows,
            metadata,
        })
    }

    /// Convenience constructor from string slices, mostly for tests and fixtures.
    pub fn from_strs(headers: &[&str], rows: &[&[&str]]) -> Result<Self, TableError> {
        Self::new(
            headers.iter().map(|s| s.to_string()).collect(),
            rows.iter()
                .map(|r| r.iter().map(|s| s.to_string()).collect())
                .collect(),
        )
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.headers.len()
    }

    pub fn headers(&self) -> &[String] {
        &self.headers
    }

    pub fn header(&self, col: usize) -> Option<&str> {
        self.headers.get(col).map(String::as_str)
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn row(&self, row: usize) -> Option<&[String]> {
        self.rows.get(row).map(Vec::as_slice)
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    pub fn set_metadata(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.metadata.insert(key.into(), value.into());
    }

    pub fn cell(&self, cell: CellRef) -> Option<&str> {
        self.rows
            .get(cell.row)
            .and_then(|r| r.get(cell.col))
            .map(String::as_str)
    }

    pub fn contains(&self, cell: CellRef) -> bool {
        cell.row < self.n_rows() && cell.col < self.n_cols()
    }

    pub fn check(&self, cell: CellRef) -> Result<(), TableError> {
        if self.contains(cell) {
            Ok(())
        } else {
            Err(TableError::OutOfBounds {
                cell,
                n_rows: self.n_rows(),
                n_cols: self.n_cols(),
            })
        }
    }

    pub fn all_rows(&self) -> BTreeSet<usize> {
        (0..self.n_rows()).collect()
    }

    pub fn all_cols(&self) -> BTreeSet<usize> {
        (0..self.n_cols()).collect()
    }

    /// Iterates every coordinate in row-major order.
    pub fn coords(&self) -> impl Iterator<Item = CellRef> + '_ {
        (0..self.n_rows()).flat_map(move |r| (0..self.n_cols()).map(move |c| CellRef::new(r, c)))
    }
}

/// Zero-based `(row, col)` coordinate of a data cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "(usize, usize)", into = "(usize, usize)")]
pub struct CellRef {
    pub row: usize,
    pub col: usize,
}

impl CellRef {
    pub const fn new(row: usize, col: usize) -> Self {
        CellRef { row, col }
    }
}

impl From<(usize, usize)> for CellRef {
    fn from((row, col): (usize, usize)) -> Self {
        CellRef { row, col }
    }
}

impl From<CellRef> for (usize, usize) {
    fn from(c: CellRef) -> Self {
        (c.row, c.col)
    }
}

impl fmt::Display for CellRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

/// Deduplicated, ordered set of cells. Serializes as a list of `[row, col]` pairs.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AttributionSet {
    cells: BTreeSet<CellRef>,
}

impl AttributionSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, cell: CellRef) -> bool {
        self.cells.insert(cell)
    }

    pub fn contains(&self, cell: &CellRef) -> bool {
        self.cells.contains(cell)
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &CellRef> {
        self.cells.iter()
    }

    pub fn extend_from(&mut self, other: &AttributionSet) {
        self.cells.extend(other.cells.iter().copied());
    }

    pub fn union(&self, other: &AttributionSet) -> AttributionSet {
        let mut out = self.clone();
        out.extend_from(other);
        out
    }

    pub fn intersection_len(&self, other: &AttributionSet) -> usize {
        self.cells.intersection(&other.cells).count()
    }

    pub fn is_subset(&self, other: &AttributionSet) -> bool {
        self.cells.is_subset(&other.cells)
    }

    pub fn rows(&self) -> BTreeSet<usize> {
        self.cells.iter().map(|c| c.row).collect()
    }

    pub fn cols(&self) -> BTreeSet<usize> {
        self.cells.iter().map(|c| c.col).collect()
    }

    pub fn as_set(&self) -> &BTreeSet<CellRef> {
        &self.cells
    }

    /// Fails on the first coordinate that does not fit `table`.
    pub fn validate(&self, table: &Table) -> Result<(), TableError> {
        self.cells.iter().try_for_each(|c| table.check(*c))
    }
}

impl FromIterator<CellRef> for AttributionSet {
    fn from_iter<I: IntoIterator<Item = CellRef>>(iter: I) -> Self {
        AttributionSet {
            cells: iter.into_iter().collect(),
        }
    }
}

impl FromIterator<(usize, usize)> for AttributionSet {
    fn from_iter<I: IntoIterator<Item = (usize, usize)>>(iter: I) -> Self {
        iter.into_iter().map(CellRef::from).collect()
    }
}

impl<'a> IntoIterator for &'a AttributionSet {
    type Item = &'a CellRef;
    type IntoIter = std::collections::btree_set::Iter<'a, CellRef>;

    fn into_iter(self) -> Self::IntoIter {
        self.cells.iter()
    }
}

/// Sub-table with maps from view coordinates back to the original table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrunedTable {
    view: Table,
    row_map: Vec<usize>,
    col_map: Vec<usize>,
}

impl PrunedTable {
    /// The trivial pruning that keeps everything.
    pub fn identity(table: &Table) -> Self {
        PrunedTable {
            view: table.clone(),
            row_map: (0..table.n_rows()).collect(),
            col_map: (0..table.n_cols()).collect(),
        }
    }

    pub fn view(&self) -> &Table {
        &self.view
    }

    pub fn row_map(&self) -> &[usize] {
        &self.row_map
    }

    pub fn col_map(&self) -> &[usize] {
        &self.col_map
    }

    pub fn to_original(&self, cell: CellRef) -> Result<CellRef, TableError> {
        self.view.check(cell)?;
        Ok(CellRef::new(self.row_map[cell.row], self.col_map[cell.col]))
    }

    /// Inverse lookup: the view coordinate of an original cell, if it was retained.
    pub fn to_view(&self, cell: CellRef) -> Option<CellRef> {
        let row = self.row_map.binary_search(&cell.row).ok()?;
        let col = self.col_map.binary_search(&cell.col).ok()?;
        Some(CellRef::new(row, col))
    }
}

/// Keeps exactly `rows` × `cols` of `table`, in original relative order.
pub fn prune(
    table: &Table,
    rows: &BTreeSet<usize>,
    cols: &BTreeSet<usize>,
) -> Result<PrunedTable, TableError> {
    if rows.is_empty() || cols.is_empty() {
        return Err(TableError::EmptySelection {
            rows: rows.len(),
            cols: cols.len(),
        });
    }
    if let Some(&r) = rows.iter().find(|&&r| r >= table.n_rows()) {
        return Err(TableError::RowOutOfBounds {
            row: r,
            n_rows: table.n_rows(),
        });
    }
    if let Some(&c) = cols.iter().find(|&&c| c >= table.n_cols()) {
        return Err(TableError::ColOutOfBounds {
            col: c,
            n_cols: table.n_cols(),
        });
    }
    let row_map: Vec<usize> = rows.iter().copied().collect();
    let col_map: Vec<usize> = cols.iter().copied().collect();
    let headers = col_map.iter().map(|&c| table.headers[c].clone()).collect();
    let grid = row_map
        .iter()
        .map(|&r| col_map.iter().map(|&c| table.rows[r][c].clone()).collect())
        .collect();
    let view = Table::with_metadata(headers, grid, table.metadata.clone())?;
    Ok(PrunedTable {
        view,
        row_map,
        col_map,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RenderFormat {
    Markdown,
    Delimited,
}

/// Serializes a table for a prompt.
///
/// The first line carries column indices next to the header labels and every
/// data line starts with its row index, so a model can cite `[row, col]`.
/// Cell text is escaped so that distinct tables of one shape never render the
/// same.
pub fn render_table(table: &Table, format: RenderFormat) -> String {
    let mut out = String::new();
    match format {
        RenderFormat::Markdown => {
            out.push_str("| row");
            for (j, h) in table.headers.iter().enumerate() {
                out.push_str(&format!(" | {}: {}", j, escape(h, '|')));
            }
            out.push_str(" |\n|");
            for _ in 0..=table.n_cols() {
                out.push_str(" --- |");
            }
            out.push('\n');
            for (i, row) in table.rows.iter().enumerate() {
                out.push_str(&format!("| {}", i));
                for cell in row {
                    out.push_str(" | ");
                    out.push_str(&escape(cell, '|'));
                }
                out.push_str(" |\n");
            }
        }
        RenderFormat::Delimited => {
            out.push_str("row");
            for (j, h) in table.headers.iter().enumerate() {
                out.push_str(&format!("\t{}: {}", j, escape(h, '\t')));
            }
            out.push('\n');
            for (i, row) in table.rows.iter().enumerate() {
                out.push_str(&i.to_string());
                for cell in row {
                    out.push('\t');
                    out.push_str(&escape(cell, '\t'));
                }
                out.push('\n');
            }
        }
    }
    out
}

fn escape(text: &str, delimiter: char) -> String {
    let mut out = String::with_capacity(text.len());
    for ch in text.chars() {
        match ch {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if c == delimiter => {
                out.push('\\');
                out.push(c);
            }
            c => out.push(c),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn energy() -> Table {
        Table::from_strs(
            &["Source", "Cost", "Efficiency", "Scalability"],
            &[
                &["Solar Power", "30–50", "15–20", "4"],
                &["Wind Power", "20–40", "30–45", "5"],
                &["Hydropower", "40–70", "70–90", "3"],
                &["Geothermal", "50–80", "90+", "2"],
            ],
        )
        .unwrap()
    }

    fn films() -> Table {
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
        .unwrap()
    }

    fn set(xs: &[usize]) -> BTreeSet<usize> {
        xs.iter().copied().collect()
    }

    #[test]
    fn rejects_ragged_and_empty() {
        assert!(matches!(
            Table::from_strs(&["a", "b"], &[&["1"]]),
            Err(TableError::Ragged { row: 0, .. })
        ));
        assert!(matches!(
            Table::from_strs(&["a"], &[]),
            Err(TableError::NoRows)
        ));
        assert!(matches!(
            Table::from_strs(&[], &[&[]]),
            Err(TableError::NoColumns)
        ));
    }

    #[test]
    fn prune_energy_keeps_solar_and_wind() {
        let t = energy();
        let p = prune(&t, &set(&[0, 1]), &set(&[0, 1, 3])).unwrap();
        assert_eq!(p.view().n_rows(), 2);
        assert_eq!(p.view().n_cols(), 3);
        assert_eq!(p.row_map(), &[0, 1]);
        assert_eq!(p.col_map(), &[0, 1, 3]);
        assert_eq!(p.view().headers(), &["Source", "Cost", "Scalability"]);
        assert_eq!(
            p.to_original(CellRef::new(1, 2)).unwrap(),
            CellRef::new(1, 3)
        );
    }

    #[test]
    fn prune_all_is_identity() {
        let t = energy();
        let p = prune(&t, &t.all_rows(), &t.all_cols()).unwrap();
        assert_eq!(p, PrunedTable::identity(&t));
        assert_eq!(p.view(), &t);
        assert_eq!(
            p.to_original(CellRef::new(2, 3)).unwrap(),
            CellRef::new(2, 3)
        );
    }

    #[test]
    fn prune_films_maps_back() {
        let t = films();
        let p = prune(&t, &set(&[1, 2]), &set(&[1, 2, 3])).unwrap();
        assert_eq!((p.view().n_rows(), p.view().n_cols()), (2, 3));
        let orig = p.to_original(CellRef::new(0, 0)).unwrap();
        assert_eq!(orig, CellRef::new(1, 1));
        assert_eq!(t.cell(orig), Some("Kadhalil Sodhapuvadhu Yeppadi"));
        assert_eq!(
            p.to_original(CellRef::new(1, 2)).unwrap(),
            CellRef::new(2, 3)
        );
        assert_eq!(p.to_view(CellRef::new(2, 3)), Some(CellRef::new(1, 2)));
        assert_eq!(p.to_view(CellRef::new(0, 0)), None);
    }

    #[test]
    fn prune_errors() {
        let t = energy();
        assert!(matches!(
            prune(&t, &set(&[]), &set(&[0])),
            Err(TableError::EmptySelection { .. })
        ));
        assert!(matches!(
            prune(&t, &set(&[4]), &set(&[0])),
            Err(TableError::RowOutOfBounds { row: 4, .. })
        ));
        assert!(matches!(
            prune(&t, &set(&[0]), &set(&[9])),
            Err(TableError::ColOutOfBounds { col: 9, .. })
        ));
        let p = PrunedTable::identity(&t);
        assert!(p.to_original(CellRef::new(4, 0)).is_err());
    }

    #[test]
    fn render_single_cell() {
        let t = Table::from_strs(&["h"], &[&["x"]]).unwrap();
        let md = render_table(&t, RenderFormat::Markdown);
        assert_eq!(md, "| row | 0: h |\n| --- | --- |\n| 0 | x |\n");
        let tsv = render_table(&t, RenderFormat::Delimited);
        assert_eq!(tsv, "row\t0: h\n0\tx\n");
    }

    #[test]
    fn render_energy_in_order() {
        let md = render_table(&energy(), RenderFormat::Markdown);
        let lines: Vec<&str> = md.lines().collect();
        assert_eq!(lines.len(), 2 + 4);
        assert_eq!(
            lines[0],
            "| row | 0: Source | 1: Cost | 2: Efficiency | 3: Scalability |"
        );
        assert_eq!(lines[3], "| 1 | Wind Power | 20–40 | 30–45 | 5 |");
    }

    #[test]
    fn render_escapes_delimiters() {
        let a = Table::from_strs(&["h", "g"], &[&["a|b", "c"]]).unwrap();
        let b = Table::from_strs(&["h", "g"], &[&["a", "b|c"]]).unwrap();
        for fmt in [RenderFormat::Markdown, RenderFormat::Delimited] {
            assert_ne!(render_table(&a, fmt), render_table(&b, fmt));
        }
        let t = Table::from_strs(&["h", "g"], &[&["a\tb", "c"]]).unwrap();
        let u = Table::from_strs(&["h", "g"], &[&["a", "b\tc"]]).unwrap();
        assert_ne!(
            render_table(&t, RenderFormat::Delimited),
            render_table(&u, RenderFormat::Delimited)
        );
    }

    #[test]
    fn table_serde_rejects_ragged() {
        let ok: Table =
            serde_json::from_str(r#"{"headers":["a"],"rows":[["1"]],"metadata":{}}"#).unwrap();
        assert_eq!(ok.n_rows(), 1);
        let bad = serde_json::from_str::<Table>(r#"{"headers":["a","b"],"rows":[["1"]]}"#);
        assert!(bad.is_err());
    }

    #[test]
    fn attribution_set_serializes_as_pairs() {
        let s: AttributionSet = [(1, 2), (0, 1), (1, 2)].into_iter().collect();
        assert_eq!(s.len(), 2);
        assert_eq!(serde_json::to_string(&s).unwrap(), "[[0,1],[1,2]]");
    }
}
