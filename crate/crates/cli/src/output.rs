//! Versioned CSV tables: a `# schema=<name>/<version>` line, optional
//! `# key=value` metadata lines, then an ordinary CSV header and rows.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::CliError;

pub const TRAJECTORY_SCHEMA: &str = "atomcurrent-trajectory/1";
pub const SME_SCHEMA: &str = "atomcurrent-sme/1";
pub const MASTER_SCHEMA: &str = "atomcurrent-master/1";
pub const RHO_SCHEMA: &str = "atomcurrent-rho/1";
pub const SPECTRUM_SCHEMA: &str = "atomcurrent-spectrum/1";
pub const DARK_POINTS_SCHEMA: &str = "atomcurrent-dark-points/1";
pub const LANDSCAPE_SCHEMA: &str = "atomcurrent-landscape/1";
pub const CUT_SCHEMA: &str = "atomcurrent-landscape-cut/1";
pub const STATS_SCHEMA: &str = "atomcurrent-stats/1";
pub const NOISE_SCHEMA: &str = "atomcurrent-noise-spectrum/1";
pub const SUMMARY_SCHEMA: &str = "atomcurrent-summary/1";
pub const MANIFEST_SCHEMA: &str = "atomcurrent-manifest/1";
pub const DARK_STATES_SCHEMA: &str = "atomcurrent-dark-states/1";

pub const ALL_SCHEMAS: [&str; 13] = [
    TRAJECTORY_SCHEMA,
    SME_SCHEMA,
    MASTER_SCHEMA,
    RHO_SCHEMA,
    SPECTRUM_SCHEMA,
    DARK_POINTS_SCHEMA,
    LANDSCAPE_SCHEMA,
    CUT_SCHEMA,
    STATS_SCHEMA,
    NOISE_SCHEMA,
    SUMMARY_SCHEMA,
    MANIFEST_SCHEMA,
    DARK_STATES_SCHEMA,
];

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub schema: String,
    pub meta: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(schema: &str, header: Vec<String>) -> Self {
        Table {
            schema: schema.into(),
            meta: Vec::new(),
            header,
            rows: Vec::new(),
        }
    }

    pub fn meta(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.meta.push((key.into(), value.to_string()));
        self
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let file = File::create(path).map_err(|e| io_err(path, e))?;
        let mut out = BufWriter::new(file);
        writeln!(out, "# schema={}", self.schema).map_err(|e| io_err(path, e))?;
        for (k, v) in &self.meta {
            writeln!(out, "# {k}={v}").map_err(|e| io_err(path, e))?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header).map_err(|e| csv_err(path, e))?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| v.to_string())).map_err(|e| csv_err(path, e))?;
        }
        w.flush().map_err(|e| io_err(path, e))
    }

    /// Reads a table and checks that its schema equals `expected` when given.
    pub fn read(path: &Path, expected: Option<&[&str]>) -> Result<Self, CliError> {
        let file = File::open(path).map_err(|e| io_err(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let first = lines
            .next()
            .transpose()
            .map_err(|e| io_err(path, e))?
            .unwrap_or_default();
        let schema = first
            .strip_prefix("# schema=")
            .ok_or_else(|| CliError::Config(format!("{}: missing schema line", path.display())))?
            .trim()
            .to_string();
        if let Some(want) = expected {
            if !want.contains(&schema.as_str()) {
                return Err(CliError::Config(format!(
                    "{}: schema `{schema}` is not one of {want:?}",
                    path.display()
                )));
            }
        }
        let mut meta = Vec::new();
        let mut body = String::new();
        for line in lines {
            let line = line.map_err(|e| io_err(path, e))?;
            if let Some(m) = line.strip_prefix("# ") {
                if let Some((k, v)) = m.split_once('=') {
                    meta.push((k.to_string(), v.to_string()));
                }
                continue;
            }
            body.push_str(&line);
            body.push('\n');
        }
        let mut r = csv::Reader::from_reader(body.as_bytes());
        let header: Vec<String> = r.headers().map_err(|e| csv_err(path, e))?.iter().map(String::from).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| csv_err(path, e))?;
            let row = rec
                .iter()
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|_| CliError::Config(format!("{}: bad number `{v}`", path.display())))
                })
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(row);
        }
        Ok(Table {
            schema,
            meta,
            header,
            rows,
        })
    }
}

pub fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("json");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Schema name to version map for the manifest.
pub fn schema_versions() -> BTreeMap<String, u32> {
    ALL_SCHEMAS
        .iter()
        .map(|s| {
            let (name, v) = s.split_once('/').expect("versioned schema");
            (name.to_string(), v.parse().expect("numeric version"))
        })
        .collect()
}
