//! Text formats for frames and eigenstep tables.
//!
//! CSV files hold one matrix row per line. Values may be separated by commas
//! or whitespace, lines starting with `#` are comments, and simple fractions
//! such as `5/3` are accepted on input. Square brackets and `;` row
//! separators are tolerated so that matrices written in MATLAB syntax can be
//! pasted in directly.
//!
//! An outer eigenstep table is stored as M rows by N columns; column n is the
//! spectrum after n vectors, written in ascending order from top to bottom.
//! Columns are re-sorted on input, so either order is accepted.

use serde::{Deserialize, Serialize};

use crate::eigensteps::{InnerEigenstepTable, NormSequence, OuterEigenstepTable};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Spectrum};
use crate::synthesis::Frame;

fn parse_err(source: &str, message: impl Into<String>) -> Error {
    Error::Parse {
        source_name: source.to_string(),
        message: message.into(),
    }
}

/// Parses a number, allowing `p/q`.
pub fn parse_value(token: &str) -> std::result::Result<f64, String> {
    let token = token.trim();
    let value = match token.split_once('/') {
        Some((num, den)) => {
            let num: f64 = num.trim().parse().map_err(|_| format!("bad number {token:?}"))?;
            let den: f64 = den.trim().parse().map_err(|_| format!("bad number {token:?}"))?;
            num / den
        }
        None => token.parse().map_err(|_| format!("bad number {token:?}"))?,
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(format!("non-finite value {token:?}"))
    }
}

/// Parses a comma- or whitespace-separated list of numbers.
pub fn parse_list(text: &str, source: &str) -> Result<Vec<f64>> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| parse_value(t).map_err(|e| parse_err(source, e)))
        .collect()
}

/// Parses numeric rows; rows may have different lengths.
pub fn parse_rows(text: &str, source: &str) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cleaned = line.replace(['[', ']'], " ");
        for piece in cleaned.split(';') {
            if piece.trim().is_empty() {
                continue;
            }
            let row: Vec<f64> = piece
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|t| !t.is_empty())
                .map(|t| parse_value(t).map_err(|e| parse_err(source, format!("line {}: {e}", lineno + 1))))
                .collect::<Result<_>>()?;
            rows.push(row);
        }
    }
    if rows.is_empty() {
        return Err(parse_err(source, "no numeric rows"));
    }
    Ok(rows)
}

/// Parses a rectangular matrix.
pub fn parse_matrix(text: &str, source: &str) -> Result<Matrix> {
    let rows = parse_rows(text, source)?;
    let cols = rows[0].len();
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != cols) {
        return Err(parse_err(
            source,
            format!("row {} has {} values, expected {cols}", i + 1, r.len()),
        ));
    }
    Ok(Matrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

/// Full double precision (17 significant digits), or 4 decimals when `pretty`.
pub fn format_value(x: f64, pretty: bool) -> String {
    if pretty {
        format!("{x:.4}")
    } else {
        let s = format!("{x:.16e}");
        if s.starts_with("-0.0000000000000000e0") {
            "0.0000000000000000e0".to_string()
        } else {
            s
        }
    }
}

fn header(meta: Option<&str>) -> String {
    meta.map(|m| format!("# {m}\n")).unwrap_or_default()
}

pub fn matrix_to_csv(m: &Matrix, pretty: bool, meta: Option<&str>) -> String {
    let mut out = header(meta);
    for i in 0..m.nrows() {
        let line: Vec<String> = (0..m.ncols()).map(|j| format_value(m[(i, j)], pretty)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn frame_from_csv(text: &str, source: &str) -> Result<Frame> {
    Frame::new(parse_matrix(text, source)?)
}

pub fn frame_to_csv(frame: &Frame, pretty: bool, meta: Option<&str>) -> String {
    matrix_to_csv(frame.matrix(), pretty, meta)
}

/// Reads an outer table from its M x N CSV layout. Without `mu`, the norms
/// are the trace increments between consecutive columns.
pub fn outer_from_csv(text: &str, source: &str, mu: Option<&[f64]>) -> Result<OuterEigenstepTable> {
    let m = parse_matrix(text, source)?;
    let steps: Vec<Vec<f64>> = (0..m.ncols())
        .map(|j| {
            let mut col: Vec<f64> = m.column(j).iter().copied().collect();
            col.sort_by(|a, b| b.total_cmp(a));
            col
        })
        .collect();
    with_norms(steps, mu)
}

fn with_norms(steps: Vec<Vec<f64>>, mu: Option<&[f64]>) -> Result<OuterEigenstepTable> {
    match mu {
        None => OuterEigenstepTable::from_steps(steps),
        Some(mu) => {
            let dim = steps.first().map(Vec::len).unwrap_or(0);
            let lambda = Spectrum::new(steps.last().cloned().unwrap_or_default())?;
            let mut rows = vec![vec![0.0; dim]];
            rows.extend(steps);
            OuterEigenstepTable::new(rows, NormSequence::new(mu.to_vec())?, lambda)
        }
    }
}

pub fn outer_to_csv(table: &OuterEigenstepTable, pretty: bool, meta: Option<&str>) -> String {
    let (dim, n) = (table.dim(), table.len());
    // ascending within each column, matching the usual printed layout
    let m = Matrix::from_fn(dim, n, |i, j| table.row(j + 1)[dim - 1 - i]);
    matrix_to_csv(&m, pretty, meta)
}

/// Inner tables in CSV: line n holds the n eigenvalues of row n.
pub fn inner_from_csv(text: &str, source: &str, mu: Option<&[f64]>) -> Result<InnerEigenstepTable> {
    let rows = parse_rows(text, source)?;
    match mu {
        None => InnerEigenstepTable::from_rows(rows),
        Some(mu) => {
            let lambda = rows.last().cloned().unwrap_or_default();
            InnerEigenstepTable::new(rows, NormSequence::new(mu.to_vec())?, lambda)
        }
    }
}

pub fn inner_to_csv(table: &InnerEigenstepTable, pretty: bool, meta: Option<&str>) -> String {
    let mut out = header(meta);
    for row in table.rows() {
        let line: Vec<String> = row.iter().map(|&v| format_value(v, pretty)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// JSON form of an outer table; `rows` lists the spectra after n = 1..N vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterTableJson {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub mu: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
}

impl From<&OuterEigenstepTable> for OuterTableJson {
    fn from(t: &OuterEigenstepTable) -> Self {
        OuterTableJson {
            m: t.dim(),
            n: t.len(),
            mu: t.mu().values().to_vec(),
            rows: t.rows()[1..].to_vec(),
        }
    }
}

impl OuterTableJson {
    pub fn into_table(self) -> Result<OuterEigenstepTable> {
        if self.rows.len() != self.n || self.rows.iter().any(|r| r.len() != self.m) {
            return Err(Error::Dimension(format!(
                "table JSON declares M={}, N={} but rows do not match",
                self.m, self.n
            )));
        }
        with_norms(self.rows, Some(&self.mu))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnerTableJson {
    #[serde(rename = "N")]
    pub n: usize,
    pub mu: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
}

impl From<&InnerEigenstepTable> for InnerTableJson {
    fn from(t: &InnerEigenstepTable) -> Self {
        InnerTableJson {
            n: t.len(),
            mu: t.mu().values().to_vec(),
            rows: t.rows().to_vec(),
        }
    }
}

impl InnerTableJson {
    pub fn into_table(self) -> Result<InnerEigenstepTable> {
        if self.rows.len() != self.n {
            return Err(Error::Dimension(format!(
                "table JSON declares N={} but has {} rows",
                self.n,
                self.rows.len()
            )));
        }
        let lambda = self.rows.last().cloned().unwrap_or_default();
        InnerEigenstepTable::new(self.rows, NormSequence::new(self.mu)?, lambda)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameJson {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub columns: Vec<Vec<f64>>,
}

impl From<&Frame> for FrameJson {
    fn from(f: &Frame) -> Self {
        FrameJson {
            m: f.dim(),
            n: f.len(),
            columns: f.columns(),
        }
    }
}

impl FrameJson {
    pub fn into_frame(self) -> Result<Frame> {
        if self.columns.len() != self.n {
            return Err(Error::Dimension(format!(
                "frame JSON declares N={} but has {} columns",
                self.n,
                self.columns.len()
            )));
        }
        Frame::from_columns(self.m, &self.columns)
    }
}
