use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use num::BigRational;
use thiserror::Error;

use crate::expr::Binding;
use crate::measure::{FiniteProbSpace, RandVar};
use crate::syntax::parse_decimal;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: {source}")]
    Csv { line: u64, source: csv::Error },
    #[error("no header line")]
    MissingHeader,
    #[error("no data rows")]
    NoRows,
    #[error("column {0:?} is not an identifier")]
    BadColumnName(String),
    #[error("duplicate column {0:?}")]
    DuplicateColumn(String),
    #[error("line {line}: expected {expected} cells, found {found}")]
    Ragged {
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("line {line}, column {column:?}: {cell:?} is not a decimal number")]
    NonNumeric {
        line: u64,
        column: String,
        cell: String,
    },
    #[error("line {line}: quoting is not supported")]
    Quoted { line: u64 },
    #[error("no column named {0:?}")]
    MissingColumn(String),
}

/// Rectangular table of exact decimal values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    columns: Vec<String>,
    rows: Vec<Vec<BigRational>>,
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    chars
        .next()
        .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl Dataset {
    pub fn new(columns: Vec<String>, rows: Vec<Vec<BigRational>>) -> Result<Self, DataError> {
        let mut seen = BTreeSet::new();
        for c in &columns {
            if !is_identifier(c) {
                return Err(DataError::BadColumnName(c.clone()));
            }
            if !seen.insert(c) {
                return Err(DataError::DuplicateColumn(c.clone()));
            }
        }
        if rows.is_empty() {
            return Err(DataError::NoRows);
        }
        for (i, r) in rows.iter().enumerate() {
            if r.len() != columns.len() {
                return Err(DataError::Ragged {
                    line: i as u64 + 2,
                    expected: columns.len(),
                    found: r.len(),
                });
            }
        }
        Ok(Dataset { columns, rows })
    }

    /// Parses comma-separated text: a header of column names, then rows of
    /// decimal numerals. Quotes are rejected.
    pub fn parse(text: &str) -> Result<Self, DataError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .quoting(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut records = reader.records();
        let header = match records.next() {
            Some(h) => h.map_err(|e| DataError::Csv { line: 1, source: e })?,
            None => return Err(DataError::MissingHeader),
        };
        if header.iter().any(|c| c.contains('"')) {
            return Err(DataError::Quoted { line: 1 });
        }
        let columns: Vec<String> = header.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in records {
            let rec = rec.map_err(|e| DataError::Csv {
                line: e.position().map_or(0, |p| p.line()),
                source: e,
            })?;
            let line = rec.position().map_or(0, |p| p.line());
            if rec.len() == 1 && rec[0].is_empty() {
                continue;
            }
            if rec.len() != columns.len() {
                return Err(DataError::Ragged {
                    line,
                    expected: columns.len(),
                    found: rec.len(),
                });
            }
            let row = rec
                .iter()
                .zip(&columns)
                .map(|(cell, col)| {
                    if cell.contains('"') {
                        return Err(DataError::Quoted { line });
                    }
                    parse_decimal(cell).ok_or_else(|| DataError::NonNumeric {
                        line,
                        column: col.clone(),
                        cell: cell.to_string(),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(row);
        }
        Dataset::new(columns, rows)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, DataError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| DataError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<BigRational>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn require(&self, vars: impl IntoIterator<Item = String>) -> Result<(), DataError> {
        for v in vars {
            if !self.columns.contains(&v) {
                return Err(DataError::MissingColumn(v));
            }
        }
        Ok(())
    }

    /// Rows `range` as a dataset of their own.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Self, DataError> {
        Dataset::new(self.columns.clone(), self.rows[range].to_vec())
    }

    /// Every row as a point, one column per variable (duplicates kept).
    pub fn points(&self) -> Binding {
        self.columns
            .iter()
            .enumerate()
            .map(|(j, c)| {
                (
                    c.clone(),
                    RandVar::new(self.rows.iter().map(|r| r[j].clone()).collect()),
                )
            })
            .collect()
    }
}

/// The empirical measure: distinct rows, in sorted order, weighted by
/// multiplicity over `n`.
pub fn empirical_space(data: &Dataset) -> (FiniteProbSpace, Binding) {
    let mut counts: BTreeMap<&[BigRational], u64> = BTreeMap::new();
    for row in data.rows() {
        *counts.entry(row.as_slice()).or_default() += 1;
    }
    let masses: Vec<u64> = counts.values().copied().collect();
    let space = FiniteProbSpace::from_masses(&masses).expect("nonempty positive counts");
    let binding = data
        .columns()
        .iter()
        .enumerate()
        .map(|(j, c)| {
            (
                c.clone(),
                RandVar::new(counts.keys().map(|r| r[j].clone()).collect()),
            )
        })
        .collect();
    (space, binding)
}
