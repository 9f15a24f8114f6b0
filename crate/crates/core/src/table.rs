//! The in-memory sheet model and its tab-separated wire format.
//!
//! TSV here is deliberately dumb: the first line is the header, a tab is the
//! only delimiter, and nothing is quoted or escaped. Cells are kept as the
//! raw strings the user typed.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::TsvError;
use crate::PROVENANCE_COLUMN;

/// One data row. `index` is the 1-based ordinal among data rows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Row {
    pub index: usize,
    pub cells: Vec<String>,
}

/// Locates a cell by data-row ordinal and column name.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellAddress {
    pub row: usize,
    pub column: String,
}

impl CellAddress {
    pub fn new(row: usize, column: impl Into<String>) -> Self {
        Self {
            row,
            column: column.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Row>,
    pub provenance: Option<String>,
}

impl Table {
    /// Builds a rectangular table from raw rows, numbering them from 1 and
    /// deriving provenance from the `metadata_schema_id` column.
    ///
    /// Panics if any row's width differs from the header.
    pub fn from_rows(columns: Vec<String>, rows: Vec<Vec<String>>) -> Self {
        let rows: Vec<Row> = rows
            .into_iter()
            .enumerate()
            .map(|(i, cells)| {
                assert_eq!(cells.len(), columns.len(), "row {} is ragged", i + 1);
                Row { index: i + 1, cells }
            })
            .collect();
        let mut table = Self {
            columns,
            rows,
            provenance: None,
        };
        table.provenance = table.provenance_from_column();
        table
    }

    /// Position of the first column with this name.
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn row(&self, index: usize) -> Option<&Row> {
        // rows are normally dense and 1-based; fall back to a scan otherwise
        match self.rows.get(index.wrapping_sub(1)) {
            Some(r) if r.index == index => Some(r),
            _ => self.rows.iter().find(|r| r.index == index),
        }
    }

    fn row_mut(&mut self, index: usize) -> Option<&mut Row> {
        let pos = match self.rows.get(index.wrapping_sub(1)) {
            Some(r) if r.index == index => index - 1,
            _ => self.rows.iter().position(|r| r.index == index)?,
        };
        self.rows.get_mut(pos)
    }

    pub fn cell(&self, address: &CellAddress) -> Option<&str> {
        let col = self.column_index(&address.column)?;
        self.row(address.row).map(|r| r.cells[col].as_str())
    }

    pub(crate) fn cell_mut(&mut self, address: &CellAddress) -> Option<&mut String> {
        let col = self.column_index(&address.column)?;
        self.row_mut(address.row).map(|r| &mut r.cells[col])
    }

    /// First non-blank value of the provenance column, in row order.
    pub fn provenance_from_column(&self) -> Option<String> {
        let col = self.column_index(PROVENANCE_COLUMN)?;
        self.rows
            .iter()
            .map(|r| r.cells[col].trim())
            .find(|v| !v.is_empty())
            .map(String::from)
    }
}

/// Parses a tab-separated sheet. A UTF-8 byte-order mark and `\r\n` line
/// endings are tolerated.
pub fn read_tsv(bytes: &[u8]) -> Result<Table, TsvError> {
    let text = core::str::from_utf8(bytes).map_err(|e| TsvError::NotUtf8 {
        offset: e.valid_up_to(),
    })?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    if text.is_empty() {
        return Err(TsvError::Empty);
    }
    let body = text.strip_suffix('\n').unwrap_or(text);
    let mut lines = body.split('\n').map(|l| l.strip_suffix('\r').unwrap_or(l));
    let columns: Vec<String> = lines
        .next()
        .ok_or(TsvError::Empty)?
        .split('\t')
        .map(String::from)
        .collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let cells: Vec<String> = line.split('\t').map(String::from).collect();
        if cells.len() != columns.len() {
            return Err(TsvError::Ragged {
                line: i + 2,
                expected: columns.len(),
                found: cells.len(),
            });
        }
        rows.push(cells);
    }
    Ok(Table::from_rows(columns, rows))
}

fn has_delimiter(s: &str) -> bool {
    s.contains(['\t', '\n', '\r'])
}

/// Serializes a table as header plus rows, tab-joined, `\n`-terminated.
pub fn write_tsv(table: &Table) -> Result<Vec<u8>, TsvError> {
    if table.columns.is_empty() {
        return Err(TsvError::NoColumns);
    }
    let mut out = String::new();
    for (i, c) in table.columns.iter().enumerate() {
        if has_delimiter(c) {
            return Err(TsvError::DelimiterInHeader { index: i });
        }
    }
    out.push_str(&table.columns.join("\t"));
    out.push('\n');
    for row in &table.rows {
        for (i, cell) in row.cells.iter().enumerate() {
            if has_delimiter(cell) {
                return Err(TsvError::DelimiterInCell {
                    row: row.index,
                    column: table.columns[i].clone(),
                });
            }
            if i > 0 {
                out.push('\t');
            }
            out.push_str(cell);
        }
        out.push('\n');
    }
    Ok(out.into_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| String::from(*x)).collect()
    }

    #[test]
    fn reads_simple_sheet() {
        let t = read_tsv(b"a\tb\n1\t2\n").unwrap();
        assert_eq!(t.columns, s(&["a", "b"]));
        assert_eq!(t.rows, vec![Row { index: 1, cells: s(&["1", "2"]) }]);
        assert_eq!(t.provenance, None);
    }

    #[test]
    fn trailing_newline_is_optional() {
        assert_eq!(read_tsv(b"a\tb\n1\t2").unwrap(), read_tsv(b"a\tb\n1\t2\n").unwrap());
    }

    #[test]
    fn bom_and_crlf_tolerated() {
        let t = read_tsv("\u{feff}a\tb\r\n1\t2\r\n".as_bytes()).unwrap();
        assert_eq!(t.columns, s(&["a", "b"]));
        assert_eq!(t.rows[0].cells, s(&["1", "2"]));
    }

    #[test]
    fn provenance_from_reserved_column() {
        let t = read_tsv(
            b"donor_id\tmetadata_schema_id\nD1\ttmpl-sample-v1\nD2\ttmpl-sample-v1\n",
        )
        .unwrap();
        assert_eq!(t.provenance.as_deref(), Some("tmpl-sample-v1"));
        assert_eq!(t.columns.len(), 2);
    }

    #[test]
    fn ragged_row_reports_line() {
        assert_eq!(
            read_tsv(b"a\tb\n1\n"),
            Err(TsvError::Ragged { line: 2, expected: 2, found: 1 })
        );
        assert_eq!(
            read_tsv(b"a\tb\n1\t2\n1\t2\t3\n"),
            Err(TsvError::Ragged { line: 3, expected: 2, found: 3 })
        );
    }

    #[test]
    fn empty_and_non_utf8_rejected() {
        assert_eq!(read_tsv(b""), Err(TsvError::Empty));
        assert!(matches!(read_tsv(b"a\xff\n"), Err(TsvError::NotUtf8 { offset: 1 })));
    }

    #[test]
    fn header_only_has_no_rows() {
        let t = read_tsv(b"a\tb\n").unwrap();
        assert!(t.rows.is_empty());
    }

    #[test]
    fn writes_exact_bytes() {
        let t = Table::from_rows(s(&["a", "b"]), vec![s(&["1", "2"])]);
        assert_eq!(write_tsv(&t).unwrap(), b"a\tb\n1\t2\n");
    }

    #[test]
    fn tab_in_cell_is_rejected() {
        let t = Table::from_rows(s(&["a"]), vec![s(&["x\ty"])]);
        assert_eq!(
            write_tsv(&t),
            Err(TsvError::DelimiterInCell { row: 1, column: "a".into() })
        );
    }

    #[test]
    fn cell_lookup() {
        let t = read_tsv(b"a\tb\n1\t2\n3\t4\n").unwrap();
        assert_eq!(t.cell(&CellAddress::new(2, "b")), Some("4"));
        assert_eq!(t.cell(&CellAddress::new(3, "b")), None);
        assert_eq!(t.cell(&CellAddress::new(1, "c")), None);
    }
}
