//! Result files: summary CSV, raw per-trial CSV and the run manifest.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use compia::simulator::{SnrPoint, SweepAxis};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tempfile::NamedTempFile;

use crate::config::ResolvedRun;
use crate::error::Failure;

pub const SUMMARY_HEADER: &str = "snr_db,mean_sum_rate,p10,p50,p90,dof_estimate,excluded_trials";
pub const RAW_HEADER: &str = "trial,snr_db,user,rate";

/// Provenance record written next to every result file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    /// SHA-256 of the canonical JSON encoding of `run`.
    pub spec_hash: String,
    pub started: String,
    pub finished: String,
    pub excluded_trials: usize,
    pub run: ResolvedRun,
}

pub fn spec_hash(run: &ResolvedRun) -> String {
    let bytes = serde_json::to_vec(run).expect("spec serializes");
    Sha256::digest(&bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn header(axes: &[SweepAxis], base: &str) -> String {
    let mut h: Vec<&str> = axes.iter().map(SweepAxis::name).collect();
    h.push(base);
    h.join(",")
}

fn prefix(coords: &[f64]) -> String {
    coords.iter().map(|c| format!("{c},")).collect()
}

/// Summary table, one row per SNR point of every grid point.
pub fn summary_csv(axes: &[SweepAxis], rows: &[(Vec<f64>, &[SnrPoint])]) -> String {
    let mut out = header(axes, SUMMARY_HEADER);
    out.push('\n');
    for (coords, points) in rows {
        let pre = prefix(coords);
        for p in *points {
            let s = &p.summary;
            let _ = writeln!(
                out,
                "{pre}{},{},{},{},{},{},{}",
                s.snr_db,
                s.mean_sum_rate,
                s.percentile(0.1),
                s.percentile(0.5),
                s.percentile(0.9),
                s.dof_estimate,
                s.excluded_trials
            );
        }
    }
    out
}

/// Per-user rates of every included trial; users are numbered from 1.
pub fn raw_csv(axes: &[SweepAxis], rows: &[(Vec<f64>, &[SnrPoint])]) -> String {
    let mut out = header(axes, RAW_HEADER);
    out.push('\n');
    for (coords, points) in rows {
        let pre = prefix(coords);
        for p in *points {
            for (t, trial) in p.trials.iter().enumerate() {
                let Some(trial) = trial else { continue };
                for (u, r) in trial.per_user_rate.iter().enumerate() {
                    let _ = writeln!(out, "{pre}{t},{},{},{r}", p.summary.snr_db, u + 1);
                }
            }
        }
    }
    out
}

/// `out.csv` -> `out.raw.csv`.
pub fn raw_path(output: &Path) -> PathBuf {
    output.with_extension("raw.csv")
}

/// `out.csv` -> `out.csv.manifest.json`.
pub fn manifest_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// Writes every file to a temporary sibling first and renames only once all
/// contents are on disk.
pub fn write_atomic(files: &[(PathBuf, String)]) -> Result<(), Failure> {
    let mut staged = Vec::with_capacity(files.len());
    for (path, contents) in files {
        let dir = match path.parent() {
            Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
            _ => PathBuf::from("."),
        };
        std::fs::create_dir_all(&dir)
            .map_err(|e| Failure::usage(format!("cannot create {}: {e}", dir.display())))?;
        let mut tmp = NamedTempFile::new_in(&dir)?;
        tmp.write_all(contents.as_bytes())?;
        tmp.as_file().sync_all()?;
        staged.push((tmp, path));
    }
    for (tmp, path) in staged {
        tmp.persist(path)
            .map_err(|e| Failure::usage(format!("cannot write {}: {}", path.display(), e.error)))?;
    }
    Ok(())
}
