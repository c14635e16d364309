//! Named feature matrices shared by every extraction level.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::corpus::SampleKey;
use crate::error::{Error, Result};

/// Rows are texts, columns are named features. Undefined cells are `None`
/// and are excluded from corpus means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub columns: Vec<String>,
    pub keys: Vec<SampleKey>,
    values: Vec<Option<f64>>,
}

impl FeatureMatrix {
    pub fn new(columns: Vec<String>) -> Self {
        FeatureMatrix {
            columns,
            keys: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn push_row(&mut self, key: SampleKey, row: Vec<Option<f64>>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::Dimension {
                expected: self.columns.len(),
                found: row.len(),
            });
        }
        self.keys.push(key);
        self.values.extend(row);
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.keys.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn row(&self, i: usize) -> &[Option<f64>] {
        let w = self.n_cols();
        &self.values[i * w..(i + 1) * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[Option<f64>]> {
        (0..self.n_rows()).map(move |i| self.row(i))
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.values[row * self.n_cols() + col]
    }

    pub fn column(&self, col: usize) -> impl Iterator<Item = Option<f64>> + '_ {
        (0..self.n_rows()).map(move |r| self.get(r, col))
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Writes `sample_id,variant,<features...>`; undefined cells are empty.
    /// Optional `preamble` lines are emitted first, each prefixed with `# `.
    pub fn write_csv<W: Write>(&self, mut out: W, preamble: &[String]) -> Result<()> {
        for line in preamble {
            writeln!(out, "# {line}").map_err(|e| Error::io("<csv>", e))?;
        }
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["sample_id".to_string(), "variant".to_string()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header)?;
        for (key, row) in self.keys.iter().zip(self.rows()) {
            let mut rec = vec![key.id.clone(), key.variant.code().to_string()];
            rec.extend(row.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    /// Reads a matrix written by [`FeatureMatrix::write_csv`], skipping `#` lines.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut body = String::new();
        for line in input.lines() {
            let line = line.map_err(|e| Error::io("<csv>", e))?;
            if !line.starts_with('#') {
                body.push_str(&line);
                body.push('\n');
            }
        }
        let mut r = csv::Reader::from_reader(body.as_bytes());
        let header = r.headers()?.clone();
        if header.len() < 2 || &header[0] != "sample_id" || &header[1] != "variant" {
            return Err(Error::InvalidArgument("feature CSV must start with sample_id,variant".into()));
        }
        let mut m = FeatureMatrix::new(header.iter().skip(2).map(String::from).collect());
        for rec in r.records() {
            let rec = rec?;
            let key = SampleKey::new(&rec[0], rec[1].parse()?);
            let row = rec
                .iter()
                .skip(2)
                .map(|c| {
                    if c.is_empty() {
                        Ok(None)
                    } else {
                        c.parse::<f64>()
                            .map(Some)
                            .map_err(|e| Error::InvalidArgument(format!("bad cell `{c}`: {e}")))
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            m.push_row(key, row)?;
        }
        Ok(m)
    }
}
