//! Hourly market data for one bidding zone: ingestion, cleaning, calendar
//! helpers and a synthetic market generator.

mod calendar;
mod clean;
mod config;
mod ingest;
mod synthetic;

pub use calendar::{calendar_dummies, dst_dates, last_sunday, CalendarDummies};
pub use clean::{
    clean, impute_locf, impute_regression, normalize_dst, CleaningLog, RegressionFill,
};
pub use config::{ColumnMap, DstRule, ZoneConfig};
pub use ingest::{load_csv, parse_csv, RawMarketData};
pub use synthetic::{generate_synthetic, GeneratingCoefficients, SyntheticMarket, SyntheticSpec};

use std::io::Write;
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{EpfError, Result};

pub const HOURS: usize = 24;

/// One day of hourly values.
pub type DayHours = [f64; HOURS];

/// Hourly variables carried by a [`MarketSeries`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum HourlyRole {
    Price,
    Solar,
    WindOn,
    WindOff,
    Load,
}

impl HourlyRole {
    pub const ALL: [HourlyRole; 5] = [
        HourlyRole::Price,
        HourlyRole::Solar,
        HourlyRole::WindOn,
        HourlyRole::WindOff,
        HourlyRole::Load,
    ];

    pub fn name(self) -> &'static str {
        match self {
            HourlyRole::Price => "price",
            HourlyRole::Solar => "solar",
            HourlyRole::WindOn => "wind_on",
            HourlyRole::WindOff => "wind_off",
            HourlyRole::Load => "load",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.name() == s)
    }
}

/// Daily commodity closing prices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Commodity {
    NGas,
    Oil,
    Coal,
    Eua,
}

impl Commodity {
    pub const ALL: [Commodity; 4] = [Commodity::NGas, Commodity::Oil, Commodity::Coal, Commodity::Eua];

    pub fn name(self) -> &'static str {
        match self {
            Commodity::NGas => "ngas",
            Commodity::Oil => "oil",
            Commodity::Coal => "coal",
            Commodity::Eua => "eua",
        }
    }
}

/// Cleaned, gap-free hourly market data for one zone.
///
/// Every day has exactly 24 values per hourly variable and days are
/// consecutive calendar dates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketSeries {
    pub zone_id: String,
    pub days: Vec<NaiveDate>,
    pub price: Vec<DayHours>,
    pub solar: Vec<DayHours>,
    pub wind_on: Vec<DayHours>,
    pub wind_off: Option<Vec<DayHours>>,
    pub load: Vec<DayHours>,
    pub ngas: Vec<f64>,
    pub oil: Vec<f64>,
    pub coal: Vec<f64>,
    pub eua: Vec<f64>,
}

impl MarketSeries {
    pub fn n_days(&self) -> usize {
        self.days.len()
    }

    pub fn has_wind_offshore(&self) -> bool {
        self.wind_off.is_some()
    }

    /// Weekday index of day `d`, Monday = 0 through Sunday = 6.
    pub fn weekday_index(&self, d: usize) -> u32 {
        self.days[d].weekday().num_days_from_monday()
    }

    pub fn hourly(&self, role: HourlyRole) -> Option<&[DayHours]> {
        match role {
            HourlyRole::Price => Some(&self.price),
            HourlyRole::Solar => Some(&self.solar),
            HourlyRole::WindOn => Some(&self.wind_on),
            HourlyRole::WindOff => self.wind_off.as_deref(),
            HourlyRole::Load => Some(&self.load),
        }
    }

    pub fn commodity(&self, c: Commodity) -> &[f64] {
        match c {
            Commodity::NGas => &self.ngas,
            Commodity::Oil => &self.oil,
            Commodity::Coal => &self.coal,
            Commodity::Eua => &self.eua,
        }
    }

    pub fn day_index(&self, date: NaiveDate) -> Option<usize> {
        let first = *self.days.first()?;
        let offset = (date - first).num_days();
        usize::try_from(offset)
            .ok()
            .filter(|&i| i < self.days.len())
    }

    /// Keeps days in `[from, to]`.
    pub fn slice_dates(&self, from: NaiveDate, to: NaiveDate) -> Result<MarketSeries> {
        let lo = self
            .days
            .iter()
            .position(|d| *d >= from)
            .ok_or_else(|| EpfError::InvalidArgument(format!("no data on or after {from}")))?;
        let hi = self.days.iter().rposition(|d| *d <= to).ok_or_else(|| {
            EpfError::InvalidArgument(format!("no data on or before {to}"))
        })?;
        if hi < lo {
            return Err(EpfError::InvalidArgument(format!("empty date range {from}..{to}")));
        }
        let r = lo..hi + 1;
        Ok(MarketSeries {
            zone_id: self.zone_id.clone(),
            days: self.days[r.clone()].to_vec(),
            price: self.price[r.clone()].to_vec(),
            solar: self.solar[r.clone()].to_vec(),
            wind_on: self.wind_on[r.clone()].to_vec(),
            wind_off: self.wind_off.as_ref().map(|w| w[r.clone()].to_vec()),
            load: self.load[r.clone()].to_vec(),
            ngas: self.ngas[r.clone()].to_vec(),
            oil: self.oil[r.clone()].to_vec(),
            coal: self.coal[r.clone()].to_vec(),
            eua: self.eua[r].to_vec(),
        })
    }

    /// Checks the structural invariants: consistent lengths, consecutive
    /// days and no missing (non-finite) values.
    pub fn validate(&self) -> Result<()> {
        let n = self.days.len();
        let hourly_ok = HourlyRole::ALL
            .iter()
            .filter_map(|r| self.hourly(*r))
            .all(|v| v.len() == n);
        let daily_ok = Commodity::ALL.iter().all(|c| self.commodity(*c).len() == n);
        if !hourly_ok || !daily_ok {
            return Err(EpfError::Data("series variables have inconsistent lengths".into()));
        }
        for w in self.days.windows(2) {
            if (w[1] - w[0]).num_days() != 1 {
                return Err(EpfError::Data(format!(
                    "days not consecutive: {} followed by {}",
                    w[0], w[1]
                )));
            }
        }
        let missing = self.count_missing();
        if missing > 0 {
            return Err(EpfError::Data(format!("{missing} missing values remain")));
        }
        Ok(())
    }

    /// Number of non-finite cells across all variables.
    pub fn count_missing(&self) -> usize {
        let hourly: usize = HourlyRole::ALL
            .iter()
            .filter_map(|r| self.hourly(*r))
            .flat_map(|v| v.iter().flatten())
            .filter(|x| !x.is_finite())
            .count();
        let daily: usize = Commodity::ALL
            .iter()
            .flat_map(|c| self.commodity(*c).iter())
            .filter(|x| !x.is_finite())
            .count();
        hourly + daily
    }

    /// Writes the series in the canonical wide CSV layout described by
    /// [`ZoneConfig::canonical`]: one row per hour, ISO-8601 local timestamps,
    /// commodity prices repeated on every row of their day.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let cfg = ZoneConfig::canonical(&self.zone_id, self.has_wind_offshore());
        let mut wtr = csv::Writer::from_writer(out);
        let header: Vec<&str> = cfg.mapped_columns().iter().map(|(_, c)| *c).collect();
        wtr.write_record(&header)?;
        for (d, date) in self.days.iter().enumerate() {
            for h in 0..HOURS {
                let mut rec = vec![format!("{}T{:02}:00:00", date.format("%Y-%m-%d"), h)];
                rec.push(self.price[d][h].to_string());
                rec.push(self.load[d][h].to_string());
                rec.push(self.solar[d][h].to_string());
                rec.push(self.wind_on[d][h].to_string());
                if let Some(w) = &self.wind_off {
                    rec.push(w[d][h].to_string());
                }
                for c in Commodity::ALL {
                    rec.push(self.commodity(c)[d].to_string());
                }
                wtr.write_record(&rec)?;
            }
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// Reads a file written by [`MarketSeries::save_csv`].
    pub fn load_canonical_csv(path: &Path, zone_id: &str, has_wind_offshore: bool) -> Result<Self> {
        let cfg = ZoneConfig::canonical(zone_id, has_wind_offshore);
        let raw = load_csv(path, &cfg)?;
        let (series, _) = clean(raw, &cfg)?;
        Ok(series)
    }
}
