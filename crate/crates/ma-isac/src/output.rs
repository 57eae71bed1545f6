//! Deterministic result export: per-slot CSV, JSON metadata and two-column
//! plot data.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{ProvenanceEntry, OUTPUT_DIR_ENV};
use crate::error::Result;
use crate::orchestrator::{SlotRecord, SweepPoint};

/// 17 significant digits, enough to re-parse every `f64` exactly.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Header of the per-slot table for `k` vehicles.
pub fn csv_header(k: usize) -> Vec<String> {
    let mut h = vec!["slot".to_string(), "sum_rate_bits".to_string()];
    for bound in ["lpcrlb", "pcrlb"] {
        for p in ["theta", "d", "nu"] {
            h.extend((1..=k).map(|i| format!("{bound}_{p}_{i}")));
        }
    }
    for state in ["true", "est"] {
        for i in 1..=k {
            h.extend([format!("{state}_theta_rad_{i}"), format!("{state}_d_m_{i}"), format!("{state}_nu_mps_{i}")]);
        }
    }
    h.extend(["feasible".to_string(), "runtime_ms".to_string()]);
    h
}

pub fn records_csv(records: &[SlotRecord], k: usize) -> String {
    let mut out = csv_header(k).join(",");
    out.push('\n');
    for r in records {
        let mut row = vec![r.slot.to_string(), fmt_f64(r.sum_rate)];
        for bounds in [&r.lpcrlb, &r.pcrlb] {
            for p in 0..3 {
                row.extend(bounds.iter().map(|b| fmt_f64(b.as_array()[p])));
            }
        }
        for states in [&r.truth, &r.tracked] {
            for v in states {
                row.extend([fmt_f64(v.theta), fmt_f64(v.distance), fmt_f64(v.speed)]);
            }
        }
        row.push(if r.feasible { "1".into() } else { "0".into() });
        row.push(fmt_f64(r.runtime_ms));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Space-separated `x y` lines.
pub fn two_column(xs: &[f64], ys: &[f64]) -> String {
    let mut out = String::new();
    for (x, y) in xs.iter().zip(ys) {
        let _ = writeln!(out, "{} {}", fmt_f64(*x), fmt_f64(*y));
    }
    out
}

/// Run metadata stored next to every result table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub command: String,
    pub seed: u64,
    pub config_hash: String,
    pub aleph: Option<[f64; 3]>,
    pub beam_tolerance: f64,
    pub ao_tolerance: f64,
    pub pga_tolerance: f64,
    pub iterations: Vec<usize>,
    pub provenance: Vec<ProvenanceEntry>,
}

pub fn sweep_csv(points: &[SweepPoint], k: usize) -> String {
    let mut h = vec!["rho".to_string(), "sum_rate_bits".to_string(), "sensing".to_string()];
    for bound in ["lpcrlb", "pcrlb"] {
        for p in ["theta", "d", "nu"] {
            h.extend((1..=k).map(|i| format!("{bound}_{p}_{i}")));
        }
    }
    h.push("outer_iterations".into());
    let mut out = h.join(",");
    out.push('\n');
    for s in points {
        let mut row = vec![fmt_f64(s.rho), fmt_f64(s.sum_rate), fmt_f64(s.sensing)];
        for bounds in [&s.lpcrlb, &s.pcrlb] {
            for p in 0..3 {
                row.extend(bounds.iter().map(|b| fmt_f64(b.as_array()[p])));
            }
        }
        row.push(s.outer_iterations.to_string());
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// `--out`, else the environment variable, else nothing.
pub fn output_dir(flag: Option<&Path>) -> Option<PathBuf> {
    flag.map(Path::to_path_buf).or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
}

/// Writes each `(name, contents)` under `dir`, creating it if needed.
pub fn write_bundle(dir: &Path, files: &[(String, String)]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, text) in files {
        std::fs::write(dir.join(name), text)?;
    }
    Ok(())
}
