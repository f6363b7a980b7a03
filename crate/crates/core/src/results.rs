//! Per-repetition result CSVs and the run manifest.
//!
//! Result columns: `rep,round,labels,test_accuracy,sel_time_s,log_gram_det,mean_norm,meta`.
//! Floats use the shortest representation that parses back to the same bits;
//! a singular batch is written as `-inf`; a missing diagnostic is an empty cell.

use std::fs::{self, File};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::al_loop::{RepetitionResult, RoundLog};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};

pub const RESULT_COLUMNS: [&str; 7] = [
    "rep",
    "round",
    "labels",
    "test_accuracy",
    "sel_time_s",
    "log_gram_det",
    "mean_norm",
];

pub const MANIFEST_FILE: &str = "manifest.json";

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_results<W: Write>(w: W, rep: usize, logs: &[RoundLog]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<&str> = RESULT_COLUMNS.to_vec();
    header.push("meta");
    out.write_record(&header)?;
    for l in logs {
        out.write_record([
            rep.to_string(),
            l.round.to_string(),
            l.labels.to_string(),
            l.test_accuracy.to_string(),
            l.sel_time_s.to_string(),
            fmt_opt(l.log_gram_det),
            fmt_opt(l.mean_norm),
            l.meta.clone(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a results CSV; returns `(rep, log)` rows in file order.
pub fn read_results<R: Read>(r: R) -> Result<Vec<(usize, RoundLog)>> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("results file is missing column {name:?}")))
    };
    let idx: Vec<usize> = RESULT_COLUMNS
        .iter()
        .map(|c| col(c))
        .collect::<Result<_>>()?;
    let meta_idx = header.iter().position(|h| h == "meta");

    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |i: usize| rec.get(idx[i]).unwrap_or("");
        let bad = |i: usize| {
            Error::Schema(format!(
                "line {line}: bad value {:?} in column {}",
                field(i),
                RESULT_COLUMNS[i]
            ))
        };
        let int = |i: usize| field(i).parse::<usize>().map_err(|_| bad(i));
        let float = |i: usize| field(i).parse::<f64>().map_err(|_| bad(i));
        let opt = |i: usize| -> Result<Option<f64>> {
            if field(i).is_empty() {
                Ok(None)
            } else {
                float(i).map(Some)
            }
        };
        rows.push((
            int(0)?,
            RoundLog {
                round: int(1)?,
                labels: int(2)?,
                test_accuracy: float(3)?,
                sel_time_s: float(4)?,
                log_gram_det: opt(5)?,
                mean_norm: opt(6)?,
                meta: meta_idx.and_then(|m| rec.get(m)).unwrap_or("").to_string(),
            },
        ));
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub dataset: String,
    pub dataset_provenance: String,
    pub selector: String,
    pub architecture: String,
    pub seeds: Vec<u64>,
    pub software_version: String,
    /// Result files relative to the manifest's directory, one per repetition.
    pub result_files: Vec<PathBuf>,
    pub truncated: Vec<bool>,
    pub started_unix_s: u64,
    pub finished_unix_s: u64,
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub fn result_file_name(rep: usize) -> String {
    format!("rep_{rep:03}.csv")
}

/// Writes one CSV per repetition plus `manifest.json` into `out_dir`.
pub fn write_run(
    out_dir: &Path,
    config: &ExperimentConfig,
    dataset_name: &str,
    dataset_provenance: &str,
    results: &[RepetitionResult],
    started_unix_s: u64,
) -> Result<RunManifest> {
    fs::create_dir_all(out_dir)?;
    let mut files = Vec::new();
    for r in results {
        let name = PathBuf::from(result_file_name(r.rep));
        write_results(File::create(out_dir.join(&name))?, r.rep, &r.logs)?;
        files.push(name);
    }
    let manifest = RunManifest {
        config: config.clone(),
        dataset: dataset_name.to_string(),
        dataset_provenance: dataset_provenance.to_string(),
        selector: config.selector.name().to_string(),
        architecture: "mlp".into(),
        seeds: results.iter().map(|r| r.seed).collect(),
        software_version: env!("CARGO_PKG_VERSION").to_string(),
        result_files: files,
        truncated: results.iter().map(|r| r.truncated).collect(),
        started_unix_s,
        finished_unix_s: unix_now(),
    };
    let mut f = File::create(out_dir.join(MANIFEST_FILE))?;
    serde_json::to_writer_pretty(&mut f, &manifest)?;
    f.write_all(b"\n")?;
    Ok(manifest)
}

/// A run read back from disk: its manifest and the logs of each repetition.
#[derive(Clone, Debug, PartialEq)]
pub struct StoredRun {
    pub dir: PathBuf,
    pub manifest: RunManifest,
    pub reps: Vec<Vec<RoundLog>>,
}

pub fn read_run(dir: &Path) -> Result<StoredRun> {
    let manifest: RunManifest = serde_json::from_reader(File::open(dir.join(MANIFEST_FILE))?)?;
    let mut reps = Vec::new();
    for f in &manifest.result_files {
        let rows = read_results(File::open(dir.join(f))?)?;
        reps.push(rows.into_iter().map(|(_, l)| l).collect());
    }
    Ok(StoredRun {
        dir: dir.to_path_buf(),
        manifest,
        reps,
    })
}
