//! The matrix file format shared by the library and the CLI: a JSON document
//! with a dimension field `r` and an `r×r` array of `{re, im}` entries in
//! row-major order. Writers emit full double precision (serde_json prints the
//! shortest representation that round-trips).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{c, CMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexEntry {
    pub re: f64,
    pub im: f64,
}

impl From<super::C64> for ComplexEntry {
    fn from(z: super::C64) -> Self {
        ComplexEntry { re: z.re, im: z.im }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixDoc {
    pub r: usize,
    pub entries: Vec<Vec<ComplexEntry>>,
}

impl MatrixDoc {
    pub fn from_matrix(m: &CMatrix) -> Self {
        let (rows, _) = m.dim();
        let entries = (0..rows)
            .map(|i| m.row(i).iter().map(|&z| z.into()).collect())
            .collect();
        MatrixDoc { r: rows, entries }
    }

    pub fn to_matrix(&self) -> Result<CMatrix> {
        if self.r == 0 {
            return Err(Error::InvalidDocument("dimension r must be positive".into()));
        }
        if self.entries.len() != self.r {
            return Err(Error::InvalidDocument(format!(
                "expected {} rows, found {}",
                self.r,
                self.entries.len()
            )));
        }
        let mut m = super::zeros(self.r);
        for (i, row) in self.entries.iter().enumerate() {
            if row.len() != self.r {
                return Err(Error::InvalidDocument(format!(
                    "row {} has {} entries, expected {}",
                    i,
                    row.len(),
                    self.r
                )));
            }
            for (j, e) in row.iter().enumerate() {
                if !e.re.is_finite() || !e.im.is_finite() {
                    return Err(Error::InvalidDocument(format!(
                        "non-finite entry at ({i}, {j})"
                    )));
                }
                m[(i, j)] = c(e.re, e.im);
            }
        }
        Ok(m)
    }
}

pub fn matrix_to_json(m: &CMatrix) -> String {
    serde_json::to_string_pretty(&MatrixDoc::from_matrix(m)).expect("matrix serialization")
}

pub fn matrix_from_json(text: &str) -> Result<CMatrix> {
    let doc: MatrixDoc = serde_json::from_str(text)?;
    doc.to_matrix()
}

pub fn read_matrix(path: &Path) -> Result<CMatrix> {
    matrix_from_json(&fs::read_to_string(path)?)
}

pub fn write_matrix(path: &Path, m: &CMatrix) -> Result<()> {
    fs::write(path, matrix_to_json(m))?;
    Ok(())
}

/// Delimited form: one line per row, entries as alternating `re,im` columns.
pub fn matrix_to_delimited(m: &CMatrix) -> String {
    let (rows, _) = m.dim();
    let mut out = String::new();
    for i in 0..rows {
        let line: Vec<String> = m
            .row(i)
            .iter()
            .flat_map(|z| [format!("{:e}", z.re), format!("{:e}", z.im)])
            .collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}
