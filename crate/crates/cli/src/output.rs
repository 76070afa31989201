//! CSV tables with a provenance comment line.

use std::fmt::Display;
use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use lambert_indiff::VERSION;

/// One CSV field.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Real(f64),
    Int(i64),
    Text(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(x: f64) -> Cell {
        Cell::Real(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Cell {
        x.map_or(Cell::Empty, Cell::Real)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Cell {
        Cell::Int(b as i64)
    }
}

impl From<usize> for Cell {
    fn from(n: usize) -> Cell {
        Cell::Int(n as i64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Cell {
        Cell::Text(s.to_string())
    }
}

/// Resolved inputs, written as `key=value` pairs on the comment line.
#[derive(Debug, Clone, Default)]
pub struct Manifest {
    pairs: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(command: &str) -> Manifest {
        let mut m = Manifest::default();
        m.set("command", command);
        m
    }

    /// Shortest round-trip formatting, so the line re-runs bit-identically.
    pub fn set(&mut self, key: &str, value: impl Display) -> &mut Manifest {
        self.pairs.push((key.to_string(), value.to_string()));
        self
    }

    pub fn line(&self) -> String {
        let body: Vec<String> = self.pairs.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!("# indiff {VERSION} {}", body.join(" "))
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(columns: &[S]) -> Table {
        Table {
            columns: columns.iter().map(|c| c.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write_to<W: Write>(
        &self,
        sink: W,
        manifest: &Manifest,
        round: Option<usize>,
    ) -> Result<(), csv::Error> {
        let mut sink = sink;
        writeln!(sink, "{}", manifest.line())?;
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|c| format_cell(c, round)))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn emit(
        &self,
        path: Option<&Path>,
        manifest: &Manifest,
        round: Option<usize>,
    ) -> Result<(), csv::Error> {
        match path {
            Some(p) => self.write_to(io::BufWriter::new(File::create(p)?), manifest, round),
            None => self.write_to(io::stdout().lock(), manifest, round),
        }
    }
}

pub fn format_cell(cell: &Cell, round: Option<usize>) -> String {
    match cell {
        Cell::Real(x) if !x.is_finite() => x.to_string(),
        Cell::Real(x) => match round {
            Some(d) => format!("{x:.d$}"),
            None => format!("{x:.16e}"),
        },
        Cell::Int(n) => n.to_string(),
        Cell::Text(s) => s.clone(),
        Cell::Empty => String::new(),
    }
}
