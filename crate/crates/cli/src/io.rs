//! CSV and JSON file formats.
//!
//! Floats are written with Rust's shortest round-trip formatting and read
//! back with the standard parser, so scans survive a write/read cycle
//! bit-for-bit.

use std::fs::{self, File};
use std::path::{Path, PathBuf};

use icent_core::counting::{FringeScan, ScanMeta};
use icent_core::interferometer::AnalyzerLabel;
use icent_core::tomography::{CoincidenceRecord, TomographySetting};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const SCAN_HEADER: [&str; 2] = ["phase_rad", "counts"];
pub const RECORDS_HEADER: [&str; 3] = ["alpha", "beta", "counts"];
pub const SCAN_FORMAT: &str = "icent-scan/1";

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| CliError::Json { path: path.into(), source })?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| CliError::Json { path: path.into(), source })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Writes a CSV table; every row must match the header length.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let csv_err = |source| CliError::Csv { path: path.into(), source };
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Reads a CSV table, checking the header exactly.
pub fn read_table(path: &Path, header: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let csv_err = |source| CliError::Csv { path: path.into(), source };
    let got = r.headers().map_err(csv_err)?.clone();
    if got.iter().ne(header.iter().copied()) {
        return Err(CliError::BadInput(format!(
            "{}: expected header {:?}, found {:?}",
            path.display(),
            header.join(","),
            got.iter().collect::<Vec<_>>().join(",")
        )));
    }
    r.records().map(|rec| rec.map_err(csv_err)).collect()
}

fn parse_field<T: std::str::FromStr>(path: &Path, line: usize, field: &str, what: &str) -> Result<T> {
    field
        .parse()
        .map_err(|_| CliError::BadInput(format!("{}:{line}: invalid {what} {field:?}", path.display())))
}

/// Scan metadata stored next to the CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSidecar {
    pub format: String,
    pub points: usize,
    pub exposure: f64,
    pub meta: ScanMeta,
}

/// Sidecar path for a scan CSV: same stem, `.json` extension.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

pub fn write_scan(csv_path: &Path, scan: &FringeScan) -> Result<()> {
    let rows: Vec<Vec<String>> = scan
        .phases()
        .iter()
        .zip(scan.counts())
        .map(|(p, c)| vec![p.to_string(), c.to_string()])
        .collect();
    write_table(csv_path, &SCAN_HEADER, &rows)?;
    let sidecar = ScanSidecar {
        format: SCAN_FORMAT.into(),
        points: scan.len(),
        exposure: scan.exposure(),
        meta: scan.meta.clone(),
    };
    write_json(&sidecar_path(csv_path), &sidecar)
}

/// Reads a scan; without a sidecar the exposure defaults to 1 and the
/// metadata is empty.
pub fn read_scan(csv_path: &Path) -> Result<FringeScan> {
    let rows = read_table(csv_path, &SCAN_HEADER)?;
    let mut phases = Vec::with_capacity(rows.len());
    let mut counts = Vec::with_capacity(rows.len());
    for (k, row) in rows.iter().enumerate() {
        let line = k + 2;
        phases.push(parse_field::<f64>(csv_path, line, &row[0], "phase")?);
        counts.push(parse_field::<u64>(csv_path, line, &row[1], "count")?);
    }
    let side = sidecar_path(csv_path);
    let (exposure, meta) = if side.exists() {
        let s: ScanSidecar = read_json(&side)?;
        if s.points != phases.len() {
            return Err(CliError::BadInput(format!(
                "{}: sidecar lists {} points, CSV has {}",
                side.display(),
                s.points,
                phases.len()
            )));
        }
        (s.exposure, s.meta)
    } else {
        (1.0, ScanMeta::default())
    };
    Ok(FringeScan::new(phases, counts, exposure, meta)?)
}

pub fn write_records(path: &Path, records: &[CoincidenceRecord]) -> Result<()> {
    let rows: Vec<Vec<String>> = records
        .iter()
        .map(|r| {
            vec![r.setting.alpha.as_char().to_string(), r.setting.beta.as_char().to_string(), r.counts.to_string()]
        })
        .collect();
    write_table(path, &RECORDS_HEADER, &rows)
}

/// Reads coincidence records. The file carries no budget, so every record
/// gets the mean counts per setting; reconstruction does not depend on the
/// value as long as it is common to all settings.
pub fn read_records(path: &Path) -> Result<Vec<CoincidenceRecord>> {
    let rows = read_table(path, &RECORDS_HEADER)?;
    let mut out = Vec::with_capacity(rows.len());
    for (k, row) in rows.iter().enumerate() {
        let line = k + 2;
        let label = |s: &str| {
            s.parse::<AnalyzerLabel>()
                .map_err(|_| CliError::BadInput(format!("{}:{line}: unknown analyzer {s:?}", path.display())))
        };
        out.push(CoincidenceRecord {
            setting: TomographySetting::new(label(&row[0])?, label(&row[1])?),
            counts: parse_field(path, line, &row[2], "count")?,
            pairs_budget: 0.0,
        });
    }
    let mean = out.iter().map(|r| r.counts as f64).sum::<f64>() / out.len().max(1) as f64;
    for r in &mut out {
        r.pairs_budget = mean;
    }
    Ok(out)
}
