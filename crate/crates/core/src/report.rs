//! Plot-ready CSV output. Floats are written with 17 significant digits so
//! every value round-trips exactly.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::stagewise::RunReport;

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
    Empty,
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Empty, Into::into)
    }
}

pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// A CSV document with an optional leading `#` comment line and a fixed
/// column count.
#[derive(Clone, Debug)]
pub struct CsvTable {
    columns: usize,
    buf: String,
}

impl CsvTable {
    pub fn new(comment: Option<&str>, header: &[&str]) -> Self {
        let mut buf = String::new();
        if let Some(c) = comment {
            buf.push_str("# ");
            buf.push_str(c);
            buf.push('\n');
        }
        buf.push_str(&header.join(","));
        buf.push('\n');
        CsvTable {
            columns: header.len(),
            buf,
        }
    }

    pub fn row(&mut self, cells: Vec<Cell>) -> Result<()> {
        if cells.len() != self.columns {
            return Err(Error::DimensionMismatch {
                expected: self.columns,
                found: cells.len(),
            });
        }
        for (k, cell) in cells.into_iter().enumerate() {
            if k > 0 {
                self.buf.push(',');
            }
            match cell {
                Cell::Int(v) => write!(self.buf, "{v}").expect("writing to a String"),
                Cell::Float(v) => self.buf.push_str(&format_float(v)),
                Cell::Text(s) if s.contains([',', '"', '\n']) => {
                    write!(self.buf, "\"{}\"", s.replace('"', "\"\"")).expect("writing to a String")
                }
                Cell::Text(s) => self.buf.push_str(&s),
                Cell::Empty => {}
            }
        }
        self.buf.push('\n');
        Ok(())
    }

    pub fn as_str(&self) -> &str {
        &self.buf
    }

    pub fn into_string(self) -> String {
        self.buf
    }
}

pub const STAGE_COLUMNS: [&str; 9] = [
    "stage",
    "batch",
    "eta",
    "budget",
    "updates",
    "cumulative_gradients",
    "cumulative_updates",
    "suboptimality",
    "target",
];

/// One row per stage of a multi-stage run.
pub fn stage_table(report: &RunReport, comment: Option<&str>) -> CsvTable {
    let mut table = CsvTable::new(comment, &STAGE_COLUMNS);
    let (mut grads, mut updates) = (0u64, 0u64);
    for s in &report.stages {
        grads += s.budget;
        updates += s.updates as u64;
        table
            .row(vec![
                s.stage.into(),
                s.batch.into(),
                s.eta.into(),
                s.budget.into(),
                s.updates.into(),
                grads.into(),
                updates.into(),
                s.suboptimality.into(),
                s.target.into(),
            ])
            .expect("row width matches header");
    }
    table
}
