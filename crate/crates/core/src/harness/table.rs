use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Column-named numeric table, the unit every harness output is written as.
/// Non-finite cells are written as empty fields.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Table {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width does not match the header");
        self.rows.push(row);
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    /// `(x, y)` pairs of two columns, skipping rows where either is missing.
    pub fn xy(&self, x: &str, y: &str) -> Vec<(f64, f64)> {
        match (self.column(x), self.column(y)) {
            (Some(xs), Some(ys)) => xs
                .into_iter()
                .zip(ys)
                .filter(|(a, b)| a.is_finite() && b.is_finite())
                .collect(),
            _ => Vec::new(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                if v.is_finite() {
                    let _ = write!(out, "{v}");
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::ConfigParse("empty table".into()))?;
        let mut table = Table::new(header.split(','));
        for (i, line) in lines.enumerate().filter(|(_, l)| !l.is_empty()) {
            let row = line
                .split(',')
                .map(|f| {
                    if f.is_empty() {
                        Ok(f64::NAN)
                    } else {
                        f.parse::<f64>()
                            .map_err(|e| Error::ConfigParse(format!("row {}: {f:?}: {e}", i + 1)))
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            if row.len() != table.columns.len() {
                return Err(Error::ConfigParse(format!(
                    "row {} has {} fields, header has {}",
                    i + 1,
                    row.len(),
                    table.columns.len()
                )));
            }
            table.rows.push(row);
        }
        Ok(table)
    }
}
