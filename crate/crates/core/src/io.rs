//! Plain-text file formats: datasets, truth records, versioned CSV headers
//! and run manifests.
//!
//! Dataset files are line oriented. The first line is `# secr-dataset v1`;
//! later lines starting with `#` are comments. Records:
//!
//! ```text
//! M 80
//! J 24
//! K 10
//! n_full 3
//! statespace 0 2.5 0 3.5 0.125     x_min x_max y_min y_max resolution
//! trap 0.6875 0.7083333333333333   one line per trap, in index order
//! capture 4 17 3 2                 row trap occasion detector
//! sex 1 4 M                        detector row M|F
//! ```
//!
//! Floats are written in Rust's shortest round-trip form, so reading a file
//! back reproduces the in-memory values exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{CaptureDataset, DatasetParts, Detector, Point, StateSpace, TrapGrid};
use crate::simulate::TruthRecord;

pub const DATASET_MAGIC: &str = "# secr-dataset v1";

pub fn write_dataset_string(data: &CaptureDataset) -> String {
    let ss = data.statespace();
    let mut out = String::new();
    let _ = writeln!(out, "{DATASET_MAGIC}");
    let _ = writeln!(out, "M {}", data.m());
    let _ = writeln!(out, "J {}", data.j());
    let _ = writeln!(out, "K {}", data.k());
    let _ = writeln!(out, "n_full {}", data.n_full());
    let _ = writeln!(
        out,
        "statespace {:?} {:?} {:?} {:?} {:?}",
        ss.x_min, ss.x_max, ss.y_min, ss.y_max, ss.grid_resolution
    );
    for p in data.traps().locations() {
        let _ = writeln!(out, "trap {:?} {:?}", p.x, p.y);
    }
    for (i, j, k, det) in data.capture_records() {
        let _ = writeln!(out, "capture {i} {j} {k} {}", det_code(det));
    }
    for (det, row, male) in data.sex_records() {
        let _ = writeln!(out, "sex {} {row} {}", det_code(det), if male { 'M' } else { 'F' });
    }
    out
}

fn det_code(d: Detector) -> u8 {
    match d {
        Detector::One => 1,
        Detector::Two => 2,
    }
}

pub fn parse_dataset(text: &str, context: &str) -> Result<CaptureDataset> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, first)) if first.trim() == DATASET_MAGIC => {}
        Some((_, first)) if first.starts_with("# secr-dataset") => {
            return Err(Error::Schema(format!(
                "{context}: unsupported dataset version `{}`",
                first.trim()
            )))
        }
        _ => return Err(Error::parse(context, "missing `# secr-dataset v1` header")),
    }
    let (mut m, mut j, mut k, mut n_full) = (None, None, None, None);
    let mut ss = None;
    let mut traps = Vec::new();
    let mut captures = Vec::new();
    let mut sex = Vec::new();
    for (no, line) in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: &str| Error::parse(format!("{context}:{}", no + 1), msg.to_string());
        let mut f = line.split_whitespace();
        let tag = f.next().unwrap_or_default();
        let rest: Vec<&str> = f.collect();
        let nums = |want: usize| -> Result<Vec<f64>> {
            if rest.len() != want {
                return Err(err(&format!("`{tag}` expects {want} fields")));
            }
            rest.iter()
                .map(|v| v.parse::<f64>().map_err(|_| err(&format!("bad number `{v}`"))))
                .collect()
        };
        let ints = |want: usize| -> Result<Vec<usize>> {
            if rest.len() < want {
                return Err(err(&format!("`{tag}` expects {want} integer fields")));
            }
            rest[..want]
                .iter()
                .map(|v| v.parse::<usize>().map_err(|_| err(&format!("bad integer `{v}`"))))
                .collect()
        };
        let det = |v: usize| match v {
            1 => Ok(Detector::One),
            2 => Ok(Detector::Two),
            _ => Err(err("detector must be 1 or 2")),
        };
        match tag {
            "M" => m = Some(ints(1)?[0]),
            "J" => j = Some(ints(1)?[0]),
            "K" => k = Some(ints(1)?[0]),
            "n_full" => n_full = Some(ints(1)?[0]),
            "statespace" => {
                let v = nums(5)?;
                ss = Some(StateSpace::new((v[0], v[1]), (v[2], v[3]), v[4])?);
            }
            "trap" => {
                let v = nums(2)?;
                traps.push(Point::new(v[0], v[1]));
            }
            "capture" => {
                if rest.len() != 4 {
                    return Err(err("`capture` expects row trap occasion detector"));
                }
                let v = ints(4)?;
                captures.push((v[0], v[1], v[2], det(v[3])?));
            }
            "sex" => {
                if rest.len() != 3 {
                    return Err(err("`sex` expects detector row M|F"));
                }
                let v = ints(2)?;
                let male = match rest[2] {
                    "M" => true,
                    "F" => false,
                    other => return Err(err(&format!("sex must be M or F, got `{other}`"))),
                };
                sex.push((det(v[0])?, v[1], male));
            }
            other => return Err(err(&format!("unknown record `{other}`"))),
        }
    }
    let missing = |what: &str| Error::parse(context, format!("missing `{what}` record"));
    let m = m.ok_or_else(|| missing("M"))?;
    let k = k.ok_or_else(|| missing("K"))?;
    let n_full = n_full.ok_or_else(|| missing("n_full"))?;
    let ss = ss.ok_or_else(|| missing("statespace"))?;
    if let Some(j) = j {
        if j != traps.len() {
            return Err(Error::parse(context, format!("J = {j} but {} trap lines", traps.len())));
        }
    }
    let traps = TrapGrid::new(traps, &ss)?;
    CaptureDataset::new(DatasetParts {
        m,
        k,
        n_full,
        traps,
        statespace: ss,
        captures,
        sex,
    })
}

pub fn write_dataset(path: &Path, data: &CaptureDataset) -> Result<()> {
    fs::write(path, write_dataset_string(data)).map_err(|e| Error::io(path, e))
}

pub fn read_dataset(path: &Path) -> Result<CaptureDataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text, &path.display().to_string())
}

pub fn write_truth(path: &Path, truth: &TruthRecord) -> Result<()> {
    let json = serde_json::to_string_pretty(truth)
        .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
    fs::write(path, json).map_err(|e| Error::io(path, e))
}

pub fn read_truth(path: &Path) -> Result<TruthRecord> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut truth: TruthRecord = serde_json::from_str(&text)
        .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
    truth.latent.l = truth.latent.l.rebuild()?;
    Ok(truth)
}

/// First line of every CSV this crate writes.
pub fn schema_line(name: &str) -> String {
    format!("# schema: {name} v1")
}

/// Checks a CSV schema line, rejecting other tables and other major versions.
pub fn check_schema_line(line: &str, name: &str) -> Result<()> {
    let rest = line
        .trim()
        .strip_prefix("# schema: ")
        .ok_or_else(|| Error::Schema(format!("expected `# schema:` line, got `{line}`")))?;
    let (found, version) = rest
        .rsplit_once(" v")
        .ok_or_else(|| Error::Schema(format!("schema line without version: `{line}`")))?;
    if found != name {
        return Err(Error::Schema(format!("expected table `{name}`, found `{found}`")));
    }
    let major = version.split('.').next().unwrap_or_default();
    if major != "1" {
        return Err(Error::Schema(format!("unsupported {name} schema version v{version}")));
    }
    Ok(())
}

/// Formats a float for CSV output; non-finite values become `NA`/`inf`/`-inf`.
pub fn csv_float(v: f64) -> String {
    if v.is_nan() {
        "NA".into()
    } else {
        format!("{v:?}")
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

/// Content hash of a dataset, independent of its file name.
pub fn dataset_hash(data: &CaptureDataset) -> String {
    sha256_hex(write_dataset_string(data).as_bytes())
}

/// Record of one command invocation, written as `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub version: String,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<String>,
    pub wall_time_secs: f64,
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset_hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    /// Warnings and per-cell failures worth keeping with the outputs.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

pub const MANIFEST_FILE: &str = "manifest.json";

impl RunManifest {
    pub fn new(subcommand: &str, config_hash: String, seeds: Vec<u64>) -> Self {
        RunManifest {
            subcommand: subcommand.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash,
            seeds,
            inputs: Vec::new(),
            outputs: Vec::new(),
            wall_time_secs: 0.0,
            status: "running".into(),
            dataset_hash: None,
            model: None,
            notes: Vec::new(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_FILE);
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
        fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{scaled_design, scaled_scenarios, simulate_dataset, SexReveal};

    #[test]
    fn dataset_round_trip_is_lossless() {
        let (data, _) = simulate_dataset(
            &scaled_scenarios()[1],
            &scaled_design(),
            9,
            SexReveal::AllCaptured,
        )
        .unwrap();
        let text = write_dataset_string(&data);
        let back = parse_dataset(&text, "mem").unwrap();
        assert_eq!(back, data);
        assert_eq!(write_dataset_string(&back), text);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = format!("{DATASET_MAGIC}\nM 2\nK x\n");
        let err = parse_dataset(&text, "f").unwrap_err().to_string();
        assert!(err.contains("f:3"), "{err}");
        assert!(parse_dataset("M 2\n", "f").is_err());
        assert!(matches!(
            parse_dataset("# secr-dataset v2\n", "f"),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn schema_versions() {
        check_schema_line(&schema_line("selections"), "selections").unwrap();
        check_schema_line("# schema: selections v1.3", "selections").unwrap();
        assert!(check_schema_line("# schema: selections v2", "selections").is_err());
        assert!(check_schema_line("# schema: rmse v1", "selections").is_err());
        assert!(check_schema_line("scenario,tool", "selections").is_err());
    }
}
