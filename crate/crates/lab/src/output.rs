//! CSV tables and the run manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::LabError;

/// Locale-free shortest round-trip formatting; exponent form for very large
/// or small magnitudes.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:?}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width for table {}", self.name);
        self.rows.push(row);
    }

    pub fn file_name(&self) -> String {
        format!("table_{}.csv", self.name)
    }

    /// Comma-separated, header first, LF line endings; fields with commas or
    /// quotes are quoted.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for row in std::iter::once(&self.header).chain(&self.rows) {
            let fields: Vec<String> = row.iter().map(|f| quote(f)).collect();
            let _ = writeln!(s, "{}", fields.join(","));
        }
        s
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

fn quote(f: &str) -> String {
    if f.contains([',', '"', '\n']) {
        format!("\"{}\"", f.replace('"', "\"\""))
    } else {
        f.to_string()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub experiment: String,
    pub config_hash: String,
    pub tool_version: String,
    pub master_seed: u64,
    /// Per-trial seeds keyed by stream label.
    pub seeds: BTreeMap<String, Vec<u64>>,
    pub wall_clock_seconds: f64,
    pub table_hashes: BTreeMap<String, String>,
    /// Hash over all table hashes; equal across reruns of the same config.
    pub attestation: String,
    pub invariant_failures: Vec<String>,
}

pub fn attestation(table_hashes: &BTreeMap<String, String>) -> String {
    let mut all = String::new();
    for (k, v) in table_hashes {
        let _ = writeln!(all, "{k} {v}");
    }
    sha256_hex(all.as_bytes())
}

/// Writes every table and `extra` JSON document under `dir`; returns the table hashes.
pub fn write_tables(
    dir: &Path,
    tables: &[Table],
    extra: &[(String, serde_json::Value)],
) -> Result<BTreeMap<String, String>, LabError> {
    fs::create_dir_all(dir)?;
    let mut hashes = BTreeMap::new();
    for t in tables {
        let csv = t.to_csv();
        fs::write(dir.join(t.file_name()), &csv)?;
        hashes.insert(t.file_name(), sha256_hex(csv.as_bytes()));
    }
    for (name, v) in extra {
        let text = serde_json::to_string_pretty(v).map_err(|e| LabError::Io(e.to_string()))?;
        fs::write(dir.join(name), text + "\n")?;
    }
    Ok(hashes)
}

pub fn write_manifest(dir: &Path, m: &RunManifest) -> Result<(), LabError> {
    let text = serde_json::to_string_pretty(m).map_err(|e| LabError::Io(e.to_string()))?;
    fs::write(dir.join("manifest.json"), text + "\n")?;
    Ok(())
}
