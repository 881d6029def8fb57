//! CSV and JSON files exchanged between subcommands.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use snaq_core::variational::{CriticalPoint, McComparison, ReferencePoint, ScanPoint};

use crate::format::fmt_f64;

#[derive(Debug)]
pub struct IoError(pub String);

impl std::fmt::Display for IoError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for IoError {}

fn err(path: &Path, e: impl std::fmt::Display) -> IoError {
    IoError(format!("{}: {e}", path.display()))
}

/// Writes `text` to `path`, or to stdout when `path` is `None`.
pub fn emit(path: Option<&Path>, text: &str) -> Result<(), IoError> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| err(dir, e))?;
            }
            fs::write(p, text).map_err(|e| err(p, e))
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(|e| IoError(format!("stdout: {e}")))
        }
    }
}

fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV is UTF-8")
}

/// One row of a phase-scan CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub g2: f64,
    pub energy: f64,
    pub plaquette: f64,
    pub converged: bool,
}

impl From<&ScanPoint> for ScanRow {
    fn from(p: &ScanPoint) -> Self {
        ScanRow { g2: p.g2, energy: p.energy, plaquette: p.plaquette, converged: p.converged }
    }
}

pub fn scan_csv(rows: &[ScanRow]) -> String {
    csv_text(
        &["g2", "energy", "plaquette", "converged"],
        rows.iter().map(|r| vec![fmt_f64(r.g2), fmt_f64(r.energy), fmt_f64(r.plaquette), r.converged.to_string()]),
    )
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, IoError> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(|e| err(path, e))?;
    r.deserialize().collect::<Result<_, _>>().map_err(|e| err(path, e))
}

pub fn read_scan_csv(path: &Path) -> Result<Vec<ScanRow>, IoError> {
    read_csv(path)
}

/// Reference table with columns `g2, plaquette, error`.
pub fn read_reference_csv(path: &Path) -> Result<Vec<ReferencePoint>, IoError> {
    read_csv(path)
}

pub fn reference_csv(points: &[ReferencePoint]) -> String {
    csv_text(
        &["g2", "plaquette", "error"],
        points.iter().map(|p| vec![fmt_f64(p.g2), fmt_f64(p.plaquette), fmt_f64(p.error)]),
    )
}

pub fn comparison_csv(rows: &[McComparison]) -> String {
    csv_text(
        &["g2", "variational", "reference", "error", "difference"],
        rows.iter().map(|c| {
            vec![fmt_f64(c.g2), fmt_f64(c.variational), fmt_f64(c.reference), fmt_f64(c.error), fmt_f64(c.difference)]
        }),
    )
}

/// Transition summary written next to a scan CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalSummary {
    pub k: u32,
    pub g2: Option<f64>,
    pub bracket: Option<(f64, f64)>,
    pub kind: Option<String>,
}

impl CriticalSummary {
    pub fn new(k: u32, c: Option<&CriticalPoint>) -> Self {
        CriticalSummary {
            k,
            g2: c.map(|c| c.g2),
            bracket: c.map(|c| c.bracket),
            kind: c.map(|c| format!("{:?}", c.kind).to_lowercase()),
        }
    }
}

/// `scan_k4.csv` -> `scan_k4.critical.json`.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("critical.json")
}

/// All `*.critical.json` summaries in `dir`, sorted by `k`.
pub fn read_critical_dir(dir: &Path) -> Result<Vec<CriticalSummary>, IoError> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| err(dir, e))? {
        let path = entry.map_err(|e| err(dir, e))?.path();
        if path.to_string_lossy().ends_with(".critical.json") {
            let text = fs::read_to_string(&path).map_err(|e| err(&path, e))?;
            out.push(serde_json::from_str(&text).map_err(|e| err(&path, e))?);
        }
    }
    out.sort_by_key(|s: &CriticalSummary| s.k);
    Ok(out)
}

/// Reads a scan CSV and a reference CSV and pairs them.
pub fn compare_scan_files(scan: &Path, reference: &Path) -> Result<Vec<McComparison>, IoError> {
    let rows = read_scan_csv(scan)?;
    let pairs: Vec<(f64, f64)> = rows.iter().map(|r| (r.g2, r.plaquette)).collect();
    Ok(snaq_core::variational::compare_reference(&pairs, &read_reference_csv(reference)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn reference_table_survives_a_file(rows in proptest::collection::vec((0.01f64..20.0, -1.0f64..1.0, 0.0f64..0.1), 1..20)) {
            let points: Vec<ReferencePoint> =
                rows.iter().map(|&(g2, plaquette, error)| ReferencePoint { g2, plaquette, error }).collect();
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("ref.csv");
            fs::write(&path, reference_csv(&points)).unwrap();
            let back = read_reference_csv(&path).unwrap();
            prop_assert_eq!(back.len(), points.len());
            for (a, b) in back.iter().zip(&points) {
                prop_assert_eq!(a.g2, crate::format::round_sig(b.g2));
                prop_assert_eq!(a.plaquette, crate::format::round_sig(b.plaquette));
            }
        }
    }

    #[test]
    fn sidecar_name() {
        assert_eq!(sidecar_path(Path::new("out/scan_k3.csv")), PathBuf::from("out/scan_k3.critical.json"));
    }
}
