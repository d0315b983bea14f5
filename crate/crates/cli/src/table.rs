//! Long-format result tables: one row per grid point, band and quantity.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::config::Format;
use crate::error::CliError;

pub const COLUMNS: [&str; 5] = ["index", "parameter", "band", "quantity", "value"];

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub index: usize,
    pub parameter: f64,
    /// `-1` for point-level scalars.
    pub band: i64,
    pub quantity: &'static str,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub name: String,
    /// Ordered metadata; written as `# key: value` lines.
    pub meta: Vec<(String, String)>,
    pub rows: Vec<Row>,
}

impl ResultTable {
    pub fn new(name: impl Into<String>, meta: Vec<(String, String)>) -> Self {
        ResultTable { name: name.into(), meta, rows: Vec::new() }
    }

    /// Rows ordered by grid index, band, then quantity name.
    pub fn sort(&mut self) {
        self.rows.sort_by(|a, b| a.index.cmp(&b.index).then(a.band.cmp(&b.band)).then(a.quantity.cmp(b.quantity)));
    }

    pub fn write_csv(&self, path: &Path, created: u64) -> Result<(), CliError> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        for (k, v) in &self.meta {
            writeln!(f, "# {k}: {v}")?;
        }
        writeln!(f, "# created_unix: {created}")?;
        let mut w = csv::Writer::from_writer(f);
        w.write_record(COLUMNS).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record([
                r.index.to_string(),
                r.parameter.to_string(),
                r.band.to_string(),
                r.quantity.to_string(),
                r.value.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self, created: u64) -> serde_json::Value {
        let mut meta = serde_json::Map::new();
        for (k, v) in &self.meta {
            meta.insert(k.clone(), serde_json::Value::String(v.clone()));
        }
        meta.insert("created_unix".into(), created.into());
        let rows: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|r| serde_json::json!([r.index, r.parameter, r.band, r.quantity, r.value]))
            .collect();
        serde_json::json!({ "columns": COLUMNS, "rows": rows, "meta": meta })
    }

    pub fn write_json(&self, path: &Path, created: u64) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(&self.to_json(created)).map_err(|e| CliError::Io(e.to_string()))?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    pub fn write(&self, dir: &Path, formats: &[Format], created: u64) -> Result<Vec<PathBuf>, CliError> {
        let mut out = Vec::new();
        for f in formats {
            let (ext, path) = match f {
                Format::Csv => ("csv", dir.join(format!("{}.csv", self.name))),
                Format::Json => ("json", dir.join(format!("{}.json", self.name))),
            };
            match ext {
                "csv" => self.write_csv(&path, created)?,
                _ => self.write_json(&path, created)?,
            }
            out.push(path);
        }
        Ok(out)
    }
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Io(e.to_string())
}
