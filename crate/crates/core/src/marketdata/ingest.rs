use std::collections::{BTreeMap, HashSet};
use std::io::Read;
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime, Timelike};

use crate::error::{EpfError, Result};
use crate::marketdata::config::{DstRule, ZoneConfig};
use crate::marketdata::dst_dates;

/// Market data as read from disk, aligned to a (day, hour) grid.
///
/// Cells that were absent or unparseable are `None`. Columns are keyed by
/// their CSV name so that actuals used for imputation travel alongside the
/// mapped roles.
#[derive(Debug, Clone, PartialEq)]
pub struct RawMarketData {
    pub zone_id: String,
    pub days: Vec<NaiveDate>,
    pub hourly: BTreeMap<String, Vec<[Option<f64>; 24]>>,
    /// Last observed value of each day for the commodity columns.
    pub daily: BTreeMap<String, Vec<Option<f64>>>,
    /// Second readings of the repeated autumn hour, keyed by day index.
    pub repeated_hour: BTreeMap<usize, BTreeMap<String, Option<f64>>>,
}

impl RawMarketData {
    pub fn count_missing(&self) -> usize {
        let h: usize = self
            .hourly
            .values()
            .flat_map(|v| v.iter().flatten())
            .filter(|x| x.is_none())
            .count();
        let d: usize = self
            .daily
            .values()
            .flat_map(|v| v.iter())
            .filter(|x| x.is_none())
            .count();
        h + d
    }
}

fn parse_timestamp(s: &str) -> Option<(NaiveDate, u32)> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        let local = dt.naive_local();
        return Some((local.date(), local.hour()));
    }
    const FORMATS: [&str; 4] = [
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%d %H:%M",
    ];
    FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .map(|dt| (dt.date(), dt.hour()))
}

fn parse_cell(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|x| x.is_finite())
}

pub fn load_csv(path: &Path, config: &ZoneConfig) -> Result<RawMarketData> {
    let file = std::fs::File::open(path)?;
    parse_csv(std::io::BufReader::new(file), config)
}

/// Parses a wide CSV (one row per local hour) into a raw day/hour grid.
pub fn parse_csv<R: Read>(reader: R, config: &ZoneConfig) -> Result<RawMarketData> {
    config.validate()?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col_index = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| EpfError::Schema(format!("missing column `{name}` in header")))
    };

    let ts_idx = col_index(&config.columns.timestamp)?;
    let mut hourly_cols: Vec<String> = config
        .hourly_roles()
        .into_iter()
        .filter_map(|r| config.hourly_column(r).map(str::to_string))
        .collect();
    hourly_cols.extend(config.impute_pairs.values().cloned());
    let daily_cols: Vec<String> = [
        &config.columns.ngas,
        &config.columns.oil,
        &config.columns.coal,
        &config.columns.eua,
    ]
    .into_iter()
    .cloned()
    .collect();
    let hourly_idx: Vec<usize> = hourly_cols
        .iter()
        .map(|c| col_index(c))
        .collect::<Result<_>>()?;
    let daily_idx: Vec<usize> = daily_cols
        .iter()
        .map(|c| col_index(c))
        .collect::<Result<_>>()?;

    struct Row {
        date: NaiveDate,
        hour: usize,
        line: u64,
        hourly: Vec<Option<f64>>,
        daily: Vec<Option<f64>>,
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let ts = rec.get(ts_idx).unwrap_or("");
        let (date, hour) = parse_timestamp(ts).ok_or_else(|| {
            EpfError::Data(format!("line {line}: unparseable timestamp `{ts}`"))
        })?;
        let cell = |i: usize| rec.get(i).and_then(parse_cell);
        rows.push(Row {
            date,
            hour: hour as usize,
            line,
            hourly: hourly_idx.iter().map(|&i| cell(i)).collect(),
            daily: daily_idx.iter().map(|&i| cell(i)).collect(),
        });
    }
    let first = rows
        .iter()
        .map(|r| r.date)
        .min()
        .ok_or_else(|| EpfError::Data("no data rows".into()))?;
    let last = rows.iter().map(|r| r.date).max().expect("non-empty");
    let n_days = (last - first).num_days() as usize + 1;
    let days: Vec<NaiveDate> = first.iter_days().take(n_days).collect();

    let mut hourly: BTreeMap<String, Vec<[Option<f64>; 24]>> = hourly_cols
        .iter()
        .map(|c| (c.clone(), vec![[None; 24]; n_days]))
        .collect();
    let mut daily: BTreeMap<String, Vec<Option<f64>>> = daily_cols
        .iter()
        .map(|c| (c.clone(), vec![None; n_days]))
        .collect();
    let mut repeated_hour: BTreeMap<usize, BTreeMap<String, Option<f64>>> = BTreeMap::new();
    let mut seen = HashSet::new();

    for row in rows {
        let d = (row.date - first).num_days() as usize;
        let is_fall_back = config.dst == DstRule::Eu
            && row.date == dst_dates(chrono::Datelike::year(&row.date)).1
            && row.hour == config.dst_hour as usize;
        if !seen.insert((d, row.hour)) {
            if is_fall_back && !repeated_hour.contains_key(&d) {
                let readings = hourly_cols.iter().cloned().zip(row.hourly.iter().copied());
                repeated_hour.insert(d, readings.collect());
            } else {
                return Err(EpfError::Data(format!(
                    "line {}: duplicate timestamp {} hour {}",
                    row.line, row.date, row.hour
                )));
            }
        } else {
            for (col, v) in hourly_cols.iter().zip(&row.hourly) {
                hourly.get_mut(col).expect("column")[d][row.hour] = *v;
            }
        }
        for (col, v) in daily_cols.iter().zip(&row.daily) {
            if v.is_some() {
                daily.get_mut(col).expect("column")[d] = *v;
            }
        }
    }

    Ok(RawMarketData {
        zone_id: config.zone_id.clone(),
        days,
        hourly,
        daily,
        repeated_hour,
    })
}
