//! Deterministic report files: a `summary.json` plus one CSV per table.
//!
//! Every file embeds the schema version and the config hash. CSV tables are
//! written with a leading `#` metadata line, then the header row, then data
//! rows; floats use the shortest round-trip encoding, so identical runs are
//! byte-identical.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use serde_json::{json, Value};

pub struct Report {
    pub pass: bool,
    pub summary: Value,
    pub tables: Vec<Table>,
    /// Human-readable diagnostics for failed checks.
    pub witnesses: Vec<String>,
}

pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table {
            name: name.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }
    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

/// Formats a float with shortest round-trip representation.
pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else if v.is_infinite() && v > 0.0 {
        "inf".to_string()
    } else if v.is_infinite() {
        "-inf".to_string()
    } else {
        "nan".to_string()
    }
}

pub fn write_report(
    out_dir: &Path,
    experiment: &str,
    config_hash: &str,
    report: &Report,
) -> Result<()> {
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create {}", out_dir.display()))?;
    let mut summary = json!({
        "schema_version": crate::config::SCHEMA_VERSION,
        "experiment": experiment,
        "config_hash": config_hash,
        "pass": report.pass,
        "tables": report.tables.iter().map(|t| format!("{}.csv", t.name)).collect::<Vec<_>>(),
        "witnesses": report.witnesses,
    });
    merge(&mut summary, &report.summary);
    let text = serde_json::to_string_pretty(&summary).context("summary serialization")?;
    std::fs::write(out_dir.join("summary.json"), text + "\n")?;
    for table in &report.tables {
        let mut body = String::new();
        writeln!(
            body,
            "# schema_version={} config_hash={}",
            crate::config::SCHEMA_VERSION,
            config_hash
        )?;
        writeln!(body, "{}", table.header.join(","))?;
        for row in &table.rows {
            writeln!(body, "{}", row.join(","))?;
        }
        std::fs::write(out_dir.join(format!("{}.csv", table.name)), body)?;
    }
    Ok(())
}

fn merge(into: &mut Value, from: &Value) {
    if let (Value::Object(a), Value::Object(b)) = (into, from) {
        for (k, v) in b {
            a.insert(k.clone(), v.clone());
        }
    }
}
