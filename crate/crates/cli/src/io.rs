//! CSV input and output.
//!
//! Matrices are one row per line with no header, vectors one value per line.
//! Result tables carry a header row and use `-` for missing cells.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use elastinet::nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub line: Option<u64>,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ParseError {}

fn at(line: Option<u64>, message: impl Into<String>) -> ParseError {
    ParseError {
        line,
        message: message.into(),
    }
}

fn from_csv(e: csv::Error) -> ParseError {
    let line = e.position().map(|p| p.line());
    let message = match e.kind() {
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
            format!("expected {expected_len} fields, found {len}")
        }
        _ => e.to_string(),
    };
    at(line, message)
}

fn parse_number(field: &str, line: u64) -> Result<f64, ParseError> {
    let t = field.trim();
    t.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| at(Some(line), format!("not a finite number: {t:?}")))
}

fn numeric_rows(reader: impl Read) -> Result<Vec<Vec<f64>>, ParseError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(from_csv)?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        rows.push(rec.iter().map(|f| parse_number(f, line)).collect::<Result<Vec<_>, _>>()?);
    }
    Ok(rows)
}

pub fn parse_matrix(reader: impl Read) -> Result<DMatrix<f64>, ParseError> {
    let rows = numeric_rows(reader)?;
    if rows.is_empty() {
        return Err(at(None, "matrix file is empty"));
    }
    let cols = rows[0].len();
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

pub fn parse_vector(reader: impl Read) -> Result<DVector<f64>, ParseError> {
    let rows = numeric_rows(reader)?;
    if rows.is_empty() {
        return Err(at(None, "vector file is empty"));
    }
    let mut out = Vec::with_capacity(rows.len());
    for (i, r) in rows.iter().enumerate() {
        if r.len() != 1 {
            return Err(at(Some(i as u64 + 1), format!("expected 1 value, found {}", r.len())));
        }
        out.push(r[0]);
    }
    Ok(DVector::from_vec(out))
}

fn open(path: &Path) -> Result<std::fs::File, ParseError> {
    std::fs::File::open(path).map_err(|e| at(None, format!("{}: {e}", path.display())))
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>, ParseError> {
    parse_matrix(open(path)?).map_err(|e| ParseError {
        message: format!("{}: {}", path.display(), e.message),
        ..e
    })
}

pub fn read_vector(path: &Path) -> Result<DVector<f64>, ParseError> {
    parse_vector(open(path)?).map_err(|e| ParseError {
        message: format!("{}: {}", path.display(), e.message),
        ..e
    })
}

pub fn write_vector(mut w: impl Write, v: &DVector<f64>) -> std::io::Result<()> {
    for x in v.iter() {
        writeln!(w, "{x}")?;
    }
    Ok(())
}

/// One table cell.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Missing,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            // both forms are the shortest text that parses back to the same f64
            Cell::Num(v) if v.fract() == 0.0 && v.abs() < 1e15 => write!(f, "{v}"),
            Cell::Num(v) => write!(f, "{v:e}"),
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Text(s) => f.write_str(s),
            Cell::Missing => f.write_str("-"),
        }
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Missing, Cell::Num)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width must match header");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn write_csv(&self, w: impl Write) -> std::io::Result<()> {
        let mut wtr = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(w);
        wtr.write_record(&self.header)?;
        for row in &self.rows {
            wtr.write_record(row.iter().map(Cell::to_string))?;
        }
        wtr.flush()
    }

    /// Reads a table written by [`Table::write_csv`]. Numeric-looking fields
    /// come back as `Num`, `-` as `Missing`, anything else as `Text`.
    pub fn read_csv(r: impl Read) -> Result<Self, ParseError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
        let header = rdr
            .headers()
            .map_err(from_csv)?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(from_csv)?;
            rows.push(
                rec.iter()
                    .map(|f| {
                        if f == "-" {
                            Cell::Missing
                        } else if let Ok(v) = f.parse::<f64>() {
                            Cell::Num(v)
                        } else {
                            Cell::Text(f.to_string())
                        }
                    })
                    .collect(),
            );
        }
        Ok(Self { header, rows })
    }

    pub fn to_json(&self) -> serde_json::Value {
        let rows = self
            .rows
            .iter()
            .map(|row| {
                let obj = self
                    .header
                    .iter()
                    .zip(row)
                    .map(|(h, c)| {
                        let v = match c {
                            Cell::Num(v) => serde_json::json!(v),
                            Cell::Int(v) => serde_json::json!(v),
                            Cell::Text(s) => serde_json::json!(s),
                            Cell::Missing => serde_json::Value::Null,
                        };
                        (h.clone(), v)
                    })
                    .collect::<serde_json::Map<_, _>>();
                serde_json::Value::Object(obj)
            })
            .collect();
        serde_json::Value::Array(rows)
    }
}
