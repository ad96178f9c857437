//! Result persistence.
//!
//! Every run lands in `<outdir>/<kind>-<confighash>/` as `results.csv` plus
//! `manifest.json`.  The hash covers the canonical JSON of the config with
//! `outdir` removed, so the same experiment always maps to the same
//! directory name no matter where it is written.  Numbers are written in
//! shortest round-trip decimal, which makes the CSV bytes a fixed point of
//! re-running: the manifest alone reproduces the table exactly.

use std::collections::BTreeMap;
use std::fmt;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, Kind};

/// One CSV cell.  Floats use Rust's shortest round-trip `Display`, so equal
/// values always produce equal bytes.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    UInt(u64),
    Float(f64),
    Bool(bool),
    Text(String),
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::UInt(v) => write!(f, "{v}"),
            Cell::Float(v) => write!(f, "{v}"),
            Cell::Bool(v) => write!(f, "{v}"),
            Cell::Text(v) => f.write_str(v),
        }
    }
}

/// A fixed-schema table: the column list is set by the experiment kind, and
/// every row carries the full set of cells (validity flags included).
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub kind: Kind,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl ResultTable {
    pub fn new(kind: Kind, columns: Vec<&'static str>) -> Self {
        ResultTable {
            kind,
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len(), "row width != schema");
        self.rows.push(row);
    }

    pub fn to_csv_bytes(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).expect("csv header");
        for row in &self.rows {
            w.write_record(row.iter().map(|c| c.to_string()))
                .expect("csv row");
        }
        w.into_inner().expect("csv flush")
    }
}

/// How the limit law was realized for distance measurements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum ReferenceNote {
    /// No reference law was needed.
    None,
    /// Closed-form Gaussian marginals.
    Exact,
    /// A large auxiliary particle system standing in for the limit flow.
    Surrogate { particles: u64, seed: u64 },
}

impl ReferenceNote {
    pub fn label(&self) -> &'static str {
        match self {
            ReferenceNote::None => "none",
            ReferenceNote::Exact => "exact",
            ReferenceNote::Surrogate { .. } => "surrogate",
        }
    }
}

/// Everything needed to re-run the table bit-exactly, plus bookkeeping.
/// `wall_time_ms` is the only field that varies between identical runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub tool_version: String,
    pub kind: Kind,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub reference: ReferenceNote,
    /// Solved/derived constants the run used, keyed by family.
    pub constants: BTreeMap<String, serde_json::Value>,
    pub columns: Vec<String>,
    pub rows: usize,
    pub wall_time_ms: u64,
}

/// Canonical config serialization: `serde_json::Value` round-trip sorts
/// object keys, floats print shortest round-trip, and `outdir` is dropped
/// (it relocates output without changing the experiment).
pub fn canonical_config_json(cfg: &ExperimentConfig) -> String {
    let mut value = serde_json::to_value(cfg).expect("config serializes");
    if let Some(map) = value.as_object_mut() {
        map.remove("outdir");
    }
    value.to_string()
}

/// First 12 hex chars of the SHA-256 of the canonical config form.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let digest = Sha256::digest(canonical_config_json(cfg).as_bytes());
    let mut out = String::with_capacity(12);
    for byte in digest.iter().take(6) {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

/// A persisted run.
#[derive(Debug)]
pub struct RunOutput {
    pub dir: PathBuf,
    pub csv_path: PathBuf,
    pub manifest_path: PathBuf,
    pub csv_bytes: Vec<u8>,
    pub table: ResultTable,
    pub manifest: Manifest,
}

/// Write `results.csv` and `manifest.json` under
/// `<outdir>/<kind>-<confighash>/`.  Errors carry the offending path.
pub fn persist(table: ResultTable, manifest: Manifest) -> Result<RunOutput, (PathBuf, io::Error)> {
    let dir = Path::new(&manifest.config.outdir)
        .join(format!("{}-{}", manifest.kind, manifest.config_hash));
    std::fs::create_dir_all(&dir).map_err(|e| (dir.clone(), e))?;
    let csv_path = dir.join("results.csv");
    let manifest_path = dir.join("manifest.json");
    let csv_bytes = table.to_csv_bytes();
    std::fs::write(&csv_path, &csv_bytes).map_err(|e| (csv_path.clone(), e))?;
    let mut manifest_json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    manifest_json.push('\n');
    std::fs::write(&manifest_path, manifest_json).map_err(|e| (manifest_path.clone(), e))?;
    Ok(RunOutput {
        dir,
        csv_path,
        manifest_path,
        csv_bytes,
        table,
        manifest,
    })
}

/// Read a manifest back; the embedded config is revalidated on use.
pub fn load_manifest(path: &Path) -> Result<Manifest, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read manifest {}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("malformed manifest {}: {e}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config_str;

    fn sample() -> ExperimentConfig {
        parse_config_str(
            r#"{"kind": "poc-sweep", "seed": 3, "particles": [10, 100], "steps": [1, 5]}"#,
            "t",
        )
        .unwrap()
    }

    #[test]
    fn hash_ignores_outdir_but_not_seed() {
        let a = sample();
        let mut b = sample();
        b.outdir = "elsewhere".into();
        assert_eq!(config_hash(&a), config_hash(&b));
        let mut c = sample();
        c.seed = 4;
        assert_ne!(config_hash(&a), config_hash(&c));
        assert_eq!(config_hash(&a).len(), 12);
    }

    #[test]
    fn canonical_form_is_key_sorted() {
        let json = canonical_config_json(&sample());
        let kind_pos = json.find("\"kind\"").unwrap();
        let seed_pos = json.find("\"seed\"").unwrap();
        let eps_pos = json.find("\"eps\"").unwrap();
        assert!(eps_pos < kind_pos && kind_pos < seed_pos);
        assert!(!json.contains("outdir"));
    }

    #[test]
    fn floats_round_trip_through_csv() {
        let mut t = ResultTable::new(Kind::Bounds, vec!["x", "ok"]);
        let vals = [0.1, 1.0 / 3.0, 2e-17, 1e300, f64::NAN];
        for &v in &vals {
            t.push(vec![Cell::Float(v), Cell::Bool(true)]);
        }
        let text = String::from_utf8(t.to_csv_bytes()).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("x,ok"));
        for (&v, line) in vals.iter().zip(lines) {
            let cell = line.split(',').next().unwrap();
            let back: f64 = cell.parse().unwrap();
            if v.is_nan() {
                assert!(back.is_nan());
            } else {
                assert_eq!(back.to_bits(), v.to_bits(), "{cell}");
            }
        }
    }
}
