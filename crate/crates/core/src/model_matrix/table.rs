use std::collections::HashSet;
use std::io::{BufRead, BufReader, Read};

use crate::error::{Error, Result};

/// A typed cell of a raw survey table.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Number(f64),
    Text(String),
    Missing,
}

impl Cell {
    pub fn is_missing(&self) -> bool {
        matches!(self, Cell::Missing)
    }

    /// Label used to match categorical levels: the text itself, or the shortest
    /// round-trip rendering of a number (`2` for `2.0`).
    pub fn label(&self) -> Option<String> {
        match self {
            Cell::Number(v) => Some(format!("{v}")),
            Cell::Text(s) => Some(s.clone()),
            Cell::Missing => None,
        }
    }
}

/// Delimited-text reading options.
#[derive(Debug, Clone, PartialEq)]
pub struct TableFormat {
    /// Field delimiter; `None` detects tab vs comma from the header row.
    pub delimiter: Option<u8>,
    pub missing_tokens: Vec<String>,
}

impl Default for TableFormat {
    fn default() -> Self {
        TableFormat {
            delimiter: None,
            missing_tokens: vec![String::new(), "NA".to_string()],
        }
    }
}

/// Rectangular table of typed cells with unique column names.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    columns: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

impl RawTable {
    pub fn new(columns: Vec<String>, rows: Vec<Vec<Cell>>) -> Result<Self> {
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.as_str()) {
                return Err(Error::Schema(format!("duplicate column name `{c}`")));
            }
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != columns.len() {
                return Err(Error::Parse {
                    row: i + 1,
                    message: format!("expected {} cells, found {}", columns.len(), row.len()),
                });
            }
        }
        Ok(RawTable { columns, rows })
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

fn sniff(field: &str, missing: &[String]) -> Cell {
    let trimmed = field.trim();
    if missing.iter().any(|m| m == trimmed) {
        Cell::Missing
    } else if let Ok(v) = trimmed.parse::<f64>() {
        if v.is_finite() {
            Cell::Number(v)
        } else {
            Cell::Text(trimmed.to_string())
        }
    } else {
        Cell::Text(trimmed.to_string())
    }
}

/// Reads a delimited UTF-8 table whose first row is the header.
///
/// Ragged rows are reported with their 1-based data-row index.
pub fn load_table<R: Read>(source: R, format: &TableFormat) -> Result<RawTable> {
    let mut reader = BufReader::new(source);
    let mut header = String::new();
    reader.read_line(&mut header)?;
    if header.trim().is_empty() {
        return Err(Error::Schema("table has no header row".into()));
    }
    let delimiter = format
        .delimiter
        .unwrap_or(if header.contains('\t') { b'\t' } else { b',' });

    let rest = std::io::Cursor::new(header.into_bytes()).chain(reader);
    let mut csv = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .flexible(true)
        .from_reader(rest);
    let columns: Vec<String> = csv
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();

    let mut rows = Vec::new();
    for (i, record) in csv.records().enumerate() {
        let record = record?;
        if record.len() != columns.len() {
            return Err(Error::Parse {
                row: i + 1,
                message: format!("expected {} cells, found {}", columns.len(), record.len()),
            });
        }
        rows.push(
            record
                .iter()
                .map(|f| sniff(f, &format.missing_tokens))
                .collect(),
        );
    }
    RawTable::new(columns, rows)
}
