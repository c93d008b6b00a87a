//! On-disk artifact layout and formats.
//!
//! ```text
//! <out>/data/cleaned.csv               canonical hourly CSV
//! <out>/data/dataset.json              zone id, offshore flag, date range
//! <out>/data/cleaning_log.json         imputation counts per rule
//! <out>/data/feature_map.txt           design column names
//! <out>/backtest/<model>/forecasts.csv date,h0..h23
//! <out>/backtest/<model>/summary.json  metrics and settings
//! <out>/backtest/<model>/timing.json   wall-clock times (not reproducible)
//! <out>/backtest/<model>/params.txt    final parameters
//! <out>/tune/<model>/study.csv         ranked trials
//! <out>/tune/<model>/trials/<sha256>.csv validation forecasts of one trial
//! <out>/select/<ensemble>/...          members.json, forecasts.csv, weights.csv
//! <out>/evaluate/metrics.{csv,json}
//! <out>/report/*.csv
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use epf_core::marketdata::{DayHours, HOURS};
use epf_core::{EpfError, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{CliError, CliResult};

#[derive(Debug, Clone)]
pub struct Paths {
    pub out: PathBuf,
}

impl Paths {
    pub fn new(out: &Path) -> Self {
        Self { out: out.to_path_buf() }
    }

    pub fn data_dir(&self) -> PathBuf {
        self.out.join("data")
    }

    pub fn cleaned_csv(&self) -> PathBuf {
        self.data_dir().join("cleaned.csv")
    }

    pub fn dataset_json(&self) -> PathBuf {
        self.data_dir().join("dataset.json")
    }

    pub fn backtest_dir(&self, model: &str) -> PathBuf {
        self.out.join("backtest").join(model)
    }

    pub fn tune_dir(&self, model: &str) -> PathBuf {
        self.out.join("tune").join(model)
    }

    pub fn select_dir(&self, ensemble: &str) -> PathBuf {
        self.out.join("select").join(ensemble)
    }

    pub fn evaluate_dir(&self) -> PathBuf {
        self.out.join("evaluate")
    }

    pub fn report_dir(&self) -> PathBuf {
        self.out.join("report")
    }
}

/// Fails with a usage error naming the command that produces `path`.
pub fn require(path: &Path, produced_by: &str) -> CliResult<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::missing(path, produced_by))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub zone_id: String,
    pub has_wind_offshore: bool,
    pub first_day: NaiveDate,
    pub last_day: NaiveDate,
    pub n_days: usize,
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, bytes)?;
    Ok(())
}

fn hour_header() -> Vec<String> {
    std::iter::once("date".to_string())
        .chain((0..HOURS).map(|h| format!("h{h}")))
        .collect()
}

pub fn forecasts_csv_bytes(dates: &[NaiveDate], forecasts: &[DayHours]) -> Result<Vec<u8>> {
    if dates.len() != forecasts.len() {
        return Err(EpfError::Data(format!(
            "{} dates for {} forecast rows",
            dates.len(),
            forecasts.len()
        )));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(hour_header())?;
    for (d, f) in dates.iter().zip(forecasts) {
        let mut rec = vec![d.to_string()];
        rec.extend(f.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.into_inner().map_err(|e| EpfError::Io(e.into_error()))
}

pub fn write_forecasts_csv(path: &Path, dates: &[NaiveDate], forecasts: &[DayHours]) -> Result<()> {
    write_file(path, &forecasts_csv_bytes(dates, forecasts)?)
}

pub fn read_forecasts_csv(path: &Path) -> Result<(Vec<NaiveDate>, Vec<DayHours>)> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
    if header != hour_header() {
        return Err(EpfError::Schema(format!("{}: expected columns date,h0..h23", path.display())));
    }
    let mut dates = Vec::new();
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let ctx = |what: &str| EpfError::Data(format!("{} row {}: invalid {what}", path.display(), i + 2));
        dates.push(rec[0].parse::<NaiveDate>().map_err(|_| ctx("date"))?);
        let mut day = [0.0; HOURS];
        for h in 0..HOURS {
            day[h] = rec[h + 1].parse().map_err(|_| ctx("forecast"))?;
        }
        rows.push(day);
    }
    Ok((dates, rows))
}

/// Lower-case hex SHA-256 of `bytes`.
pub fn content_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// One row of `study.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub trial: usize,
    pub seed: u64,
    pub params: BTreeMap<String, f64>,
    pub mae: f64,
    pub runtime_secs: f64,
    pub failed: bool,
    /// Hash naming the trial's forecast file; empty for failed trials.
    pub forecasts: String,
}

pub fn write_study_csv(path: &Path, rows: &[StudyRow]) -> Result<()> {
    let names: Vec<String> = rows.first().map(|r| r.params.keys().cloned().collect()).unwrap_or_default();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["trial".to_string(), "seed".to_string()];
    header.extend(names.iter().cloned());
    header.extend(["mae", "runtime_secs", "failed", "forecasts"].map(String::from));
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.trial.to_string(), r.seed.to_string()];
        rec.extend(names.iter().map(|n| r.params.get(n).map_or(String::new(), |v| v.to_string())));
        rec.extend([r.mae.to_string(), r.runtime_secs.to_string(), r.failed.to_string(), r.forecasts.clone()]);
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| EpfError::Io(e.into_error()))?;
    write_file(path, &bytes)
}

pub fn read_study_csv(path: &Path) -> Result<Vec<StudyRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
    let n = header.len();
    if n < 6 || header[0] != "trial" || header[1] != "seed" || header[n - 4] != "mae" {
        return Err(EpfError::Schema(format!("{}: unexpected study header", path.display())));
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = |what: &str| EpfError::Data(format!("{} row {}: invalid {what}", path.display(), i + 2));
        let mut params = BTreeMap::new();
        for (j, name) in header.iter().enumerate().take(n - 4).skip(2) {
            params.insert(name.clone(), rec[j].parse().map_err(|_| bad(name))?);
        }
        rows.push(StudyRow {
            trial: rec[0].parse().map_err(|_| bad("trial"))?,
            seed: rec[1].parse().map_err(|_| bad("seed"))?,
            params,
            mae: rec[n - 4].parse().map_err(|_| bad("mae"))?,
            runtime_secs: rec[n - 3].parse().map_err(|_| bad("runtime_secs"))?,
            failed: rec[n - 2].parse().map_err(|_| bad("failed"))?,
            forecasts: rec[n - 1].to_string(),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forecasts_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        let d0 = NaiveDate::from_ymd_opt(2024, 3, 1).unwrap();
        let rows = vec![[1.25; HOURS], std::array::from_fn(|h| h as f64 / 3.0)];
        write_forecasts_csv(&p, &[d0, d0.succ_opt().unwrap()], &rows).unwrap();
        let (dates, back) = read_forecasts_csv(&p).unwrap();
        assert_eq!(dates[1], d0.succ_opt().unwrap());
        assert_eq!(back, rows);
    }

    #[test]
    fn study_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("study.csv");
        let row = |trial, mae: f64, failed| StudyRow {
            trial,
            seed: 99,
            params: [("d_up".to_string(), 7.0), ("lr_init".to_string(), 0.0123)].into_iter().collect(),
            mae,
            runtime_secs: 0.5,
            failed,
            forecasts: if failed { String::new() } else { content_hash(b"x") },
        };
        let rows = vec![row(1, 2.5, false), row(0, f64::INFINITY, true)];
        write_study_csv(&p, &rows).unwrap();
        assert_eq!(read_study_csv(&p).unwrap(), rows);
    }

    #[test]
    fn hash_is_sha256_hex() {
        assert_eq!(
            content_hash(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
