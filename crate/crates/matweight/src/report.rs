//! CSV tables and the JSON summary that names the operation behind each column.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use matweight_core::dyadic::Interval;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::io::float_string;

/// Shortest round-trip decimal; infinities as `inf`.
pub fn num(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        float_string(x)
    }
}

pub fn interval(iv: &Interval) -> String {
    format!("[{},{})", num(iv.lo), num(iv.hi))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub file: String,
    /// Column name and the engine operation that produced it (empty for
    /// inputs and keys).
    pub columns: Vec<(&'static str, &'static str)>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(file: &str, columns: &[(&'static str, &'static str)]) -> Self {
        Self { file: file.into(), columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.columns.iter().map(|c| c.0))?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| anyhow::anyhow!("csv buffer: {e}"))
    }

    fn operations(&self) -> Value {
        let m: Map<String, Value> = self.columns.iter().filter(|c| !c.1.is_empty()).map(|c| (c.0.to_string(), Value::from(c.1))).collect();
        Value::Object(m)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }
}

/// Everything one command produces.
#[derive(Clone, Debug, Default)]
pub struct Artifacts {
    pub tables: Vec<Table>,
    pub results: Value,
    pub checks: Vec<Check>,
    /// Human-readable lines for stdout.
    pub lines: Vec<String>,
    /// Extra files (name, contents), e.g. saved weights.
    pub files: Vec<(String, String)>,
}

impl Artifacts {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn summary(&self, command: &str, seed: u64, params: &Value) -> Value {
        let operations: Map<String, Value> = self.tables.iter().map(|t| (t.file.clone(), t.operations())).collect();
        json!({
            "command": command,
            "seed": seed,
            "params": params,
            "status": if self.passed() { "ok" } else { "assertion-failure" },
            "operations": operations,
            "results": self.results,
            "checks": self.checks,
        })
    }

    pub fn write(&self, dir: &Path, summary: &Value) -> Result<()> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for t in &self.tables {
            let path = dir.join(&t.file);
            fs::write(&path, t.to_csv()?).with_context(|| format!("writing {}", path.display()))?;
        }
        for (name, text) in &self.files {
            let path = dir.join(name);
            fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        }
        let path = dir.join("summary.json");
        fs::write(&path, serde_json::to_string_pretty(summary)? + "\n").with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}
