//! CSV tables and JSON summaries written to an output directory.
//! Floats are printed with fixed precision so output bytes are stable.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    /// file stem; the table is written to `<name>.csv`
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Config(format!("csv buffer: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    pub tables: Vec<Table>,
    /// `<key>.json` documents
    pub json: BTreeMap<String, Value>,
}

impl Report {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }
}

/// Write every table and JSON document of `report` into `dir`, returning
/// the paths in write order.
pub fn emit_report(report: &Report, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for t in &report.tables {
        let path = dir.join(format!("{}.csv", t.name));
        std::fs::write(&path, t.to_csv()?).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    for (name, value) in &report.json {
        let path = dir.join(format!("{name}.json"));
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

pub fn f3(x: f64) -> String {
    format!("{x:.3}")
}

pub fn f6(x: f64) -> String {
    format!("{x:.6}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_csv() {
        let mut t = Table::new("x", &["name", "ratio"]);
        t.push(vec!["a,b".into(), f6(1.0 / 3.0)]);
        t.push(vec!["c".into(), f3(2.0)]);
        assert_eq!(t.to_csv().unwrap(), "name,ratio\n\"a,b\",0.333333\nc,2.000\n");
    }

    #[test]
    fn empty_table_is_header_only() {
        assert_eq!(Table::new("e", &["a", "b"]).to_csv().unwrap(), "a,b\n");
    }

    #[test]
    fn emit_writes_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = Report::default();
        r.tables.push(Table::new("t", &["a"]));
        r.json.insert("s".into(), serde_json::json!({"b": 1, "a": [1.5]}));
        let paths = emit_report(&r, dir.path()).unwrap();
        assert_eq!(paths.len(), 2);
        let text = std::fs::read_to_string(dir.path().join("s.json")).unwrap();
        let v: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["a"][0], 1.5);
        assert!(text.find("\"a\"").unwrap() < text.find("\"b\"").unwrap());
        assert!(emit_report(&r, &dir.path().join("s.json").join("sub")).is_err());
    }
}
