//! CSV series and the metadata sidecar.
//!
//! Numbers are written in Rust's shortest round-trip scientific notation,
//! so files are byte-for-byte reproducible and parse back to the same
//! `f64`. Nothing time- or host-dependent is recorded.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::config::ExperimentConfig;

pub const TOOL_NAME: &str = env!("CARGO_PKG_NAME");
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// One CSV field.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(v) => format!("{v:e}"),
            Cell::Int(v) => v.to_string(),
            Cell::Empty => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }
}

/// A named table destined for one CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub file_name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(file_name: impl Into<String>, header: &[&str]) -> Self {
        Self {
            file_name: file_name.into(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Column `name` as numbers (`None` for empty cells).
    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let idx = self.header.iter().position(|h| h == name)?;
        Some(
            self.rows
                .iter()
                .map(|r| match r[idx] {
                    Cell::Num(v) => Some(v),
                    Cell::Int(v) => Some(v as f64),
                    Cell::Empty => None,
                })
                .collect(),
        )
    }

    pub fn to_csv(&self) -> io::Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        w.into_inner().map_err(|e| e.into_error())
    }
}

/// Everything an experiment produces.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub tables: Vec<Table>,
    /// Derived quantities for the sidecar.
    pub derived: toml::Table,
}

impl RunOutput {
    pub fn table(&self, file_name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.file_name == file_name)
    }
}

/// Sidecar file name for an experiment kind.
pub fn metadata_file_name(config: &ExperimentConfig) -> String {
    format!("{}.meta.toml", config.kind.as_str())
}

/// Sidecar text: tool identity, derived quantities, file list and the
/// configuration (without the output directory).
pub fn metadata_text(config: &ExperimentConfig, output: &RunOutput) -> String {
    let mut cfg = config.clone();
    cfg.output.dir = None;
    let mut tool = toml::Table::new();
    tool.insert("name".into(), TOOL_NAME.into());
    tool.insert("version".into(), TOOL_VERSION.into());
    let mut doc = toml::Table::new();
    doc.insert("tool".into(), toml::Value::Table(tool));
    doc.insert("derived".into(), toml::Value::Table(output.derived.clone()));
    doc.insert(
        "files".into(),
        toml::Value::Array(output.tables.iter().map(|t| t.file_name.clone().into()).collect()),
    );
    doc.insert("config".into(), toml::Value::try_from(&cfg).expect("configuration serializes"));
    toml::to_string(&doc).expect("metadata serializes")
}

/// Writes every table and the sidecar into `dir`, creating it if needed.
/// Returns the written paths, sidecar last.
pub fn export(dir: &Path, config: &ExperimentConfig, output: &RunOutput) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::with_capacity(output.tables.len() + 1);
    for t in &output.tables {
        let path = dir.join(&t.file_name);
        fs::write(&path, t.to_csv()?)?;
        written.push(path);
    }
    let path = dir.join(metadata_file_name(config));
    fs::write(&path, metadata_text(config, output))?;
    written.push(path);
    Ok(written)
}
