//! Campaign files: `records.csv`, `timings.csv`, `summary.csv` and
//! `manifest.json`.
//!
//! Wall-clock times live in their own file so that `records.csv` is a pure
//! function of the configuration.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{summarize, BenchmarkConfig, SummaryRow, TrialRecord, TrialStatus};
use crate::error::{Error, Result};

pub const RECORDS_FILE: &str = "records.csv";
pub const TIMINGS_FILE: &str = "timings.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Serialize, Deserialize)]
struct RecordRow {
    r: usize,
    m: usize,
    n: usize,
    p_s: f64,
    alpha_a: f64,
    snr_db: f64,
    algorithm_id: String,
    trial: usize,
    seed: u64,
    status: TrialStatus,
    mean_sdr_db: Option<f64>,
    /// Semicolon-separated, in estimated-source order.
    per_source_sdr_db: String,
    final_objective: Option<f64>,
    iterations_run: Option<usize>,
    cond_a_ref: Option<f64>,
    error: String,
}

#[derive(Serialize)]
struct TimingRow<'a> {
    r: usize,
    m: usize,
    n: usize,
    p_s: f64,
    alpha_a: f64,
    snr_db: f64,
    algorithm_id: &'a str,
    trial: usize,
    wall_time_seconds: f64,
}

impl From<&TrialRecord> for RecordRow {
    fn from(t: &TrialRecord) -> Self {
        Self {
            r: t.r,
            m: t.m,
            n: t.n,
            p_s: t.p_s,
            alpha_a: t.alpha_a,
            snr_db: t.snr_db,
            algorithm_id: t.algorithm_id.clone(),
            trial: t.trial,
            seed: t.seed,
            status: t.status,
            mean_sdr_db: t.mean_sdr_db,
            per_source_sdr_db: t.per_source_sdr_db.iter().map(f64::to_string).collect::<Vec<_>>().join(";"),
            final_objective: t.final_objective,
            iterations_run: t.iterations_run,
            cond_a_ref: t.cond_a_ref,
            error: t.error.clone(),
        }
    }
}

impl TryFrom<RecordRow> for TrialRecord {
    type Error = Error;

    fn try_from(row: RecordRow) -> Result<Self> {
        let per_source_sdr_db = if row.per_source_sdr_db.is_empty() {
            Vec::new()
        } else {
            row.per_source_sdr_db
                .split(';')
                .map(|v| v.parse::<f64>().map_err(|_| Error::Format(format!("bad per-source SDR `{v}`"))))
                .collect::<Result<_>>()?
        };
        Ok(Self {
            r: row.r,
            m: row.m,
            n: row.n,
            p_s: row.p_s,
            alpha_a: row.alpha_a,
            snr_db: row.snr_db,
            algorithm_id: row.algorithm_id,
            trial: row.trial,
            seed: row.seed,
            status: row.status,
            mean_sdr_db: row.mean_sdr_db,
            per_source_sdr_db,
            final_objective: row.final_objective,
            iterations_run: row.iterations_run,
            cond_a_ref: row.cond_a_ref,
            error: row.error,
            wall_time_seconds: 0.0,
        })
    }
}

fn to_csv<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn records_to_csv(records: &[TrialRecord]) -> Result<Vec<u8>> {
    to_csv(records.iter().map(RecordRow::from))
}

pub fn summary_to_csv(rows: &[SummaryRow]) -> Result<Vec<u8>> {
    to_csv(rows)
}

pub fn write_records(path: &Path, records: &[TrialRecord]) -> Result<()> {
    fs::write(path, records_to_csv(records)?)?;
    Ok(())
}

pub fn write_timings(path: &Path, records: &[TrialRecord]) -> Result<()> {
    let rows = records.iter().map(|t| TimingRow {
        r: t.r,
        m: t.m,
        n: t.n,
        p_s: t.p_s,
        alpha_a: t.alpha_a,
        snr_db: t.snr_db,
        algorithm_id: &t.algorithm_id,
        trial: t.trial,
        wall_time_seconds: t.wall_time_seconds,
    });
    fs::write(path, to_csv(rows)?)?;
    Ok(())
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    fs::write(path, summary_to_csv(rows)?)?;
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<TrialRecord>> {
    let mut rdr = csv::Reader::from_path(path)?;
    rdr.deserialize::<RecordRow>()
        .map(|row| TrialRecord::try_from(row?))
        .collect()
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    let mut rdr = csv::Reader::from_path(path)?;
    Ok(rdr.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Everything needed to regenerate a campaign's files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub software: String,
    pub version: String,
    pub config: BenchmarkConfig,
    pub records: usize,
    pub errors: usize,
}

/// Writes the four campaign files into `dir`, creating it if needed.
pub fn write_campaign(cfg: &BenchmarkConfig, records: &[TrialRecord], dir: &Path) -> Result<Vec<SummaryRow>> {
    fs::create_dir_all(dir)?;
    let summary = summarize(records);
    write_records(&dir.join(RECORDS_FILE), records)?;
    write_timings(&dir.join(TIMINGS_FILE), records)?;
    write_summary(&dir.join(SUMMARY_FILE), &summary)?;
    let manifest = Manifest {
        software: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        records: records.len(),
        errors: records.iter().filter(|r| !r.is_ok()).count(),
    };
    fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(summary)
}
