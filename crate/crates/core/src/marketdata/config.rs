use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{EpfError, Result};
use crate::marketdata::HourlyRole;

/// Daylight-saving rule for the zone's local-time timestamps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DstRule {
    /// Clocks skip an hour on the last Sunday of March and repeat one on the
    /// last Sunday of October.
    #[default]
    Eu,
    /// Timestamps carry exactly 24 hours every day.
    None,
}

/// CSV column names for each data role.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub timestamp: String,
    pub price: String,
    pub load: String,
    pub solar: String,
    pub wind_on: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wind_off: Option<String>,
    pub ngas: String,
    pub oil: String,
    pub coal: String,
    pub eua: String,
}

/// Bidding-zone description: column mapping, offshore availability and the
/// DST convention used by the timestamps.
///
/// Stored as TOML:
///
/// ```toml
/// zone_id = "DE-LU"
/// has_wind_offshore = true
/// dst = "eu"          # or "none"
/// dst_hour = 2        # local hour skipped in spring / repeated in autumn
///
/// [columns]
/// timestamp = "time"
/// price = "price"
/// load = "load_da"
/// solar = "solar_da"
/// wind_on = "wind_on_da"
/// wind_off = "wind_off_da"
/// ngas = "ttf"
/// oil = "brent"
/// coal = "coal"
/// eua = "eua"
///
/// [impute_pairs]      # day-ahead role -> column with the realised values
/// load = "load_actual"
/// ```
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZoneConfig {
    pub zone_id: String,
    pub has_wind_offshore: bool,
    #[serde(default)]
    pub dst: DstRule,
    #[serde(default = "default_dst_hour")]
    pub dst_hour: u32,
    pub columns: ColumnMap,
    #[serde(default)]
    pub impute_pairs: BTreeMap<String, String>,
}

fn default_dst_hour() -> u32 {
    2
}

impl ZoneConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ZoneConfig =
            toml::from_str(text).map_err(|e| EpfError::Config(format!("zone config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("zone config serializes")
    }

    /// Canonical configuration used for cleaned and synthetic CSV files.
    pub fn canonical(zone_id: &str, has_wind_offshore: bool) -> Self {
        ZoneConfig {
            zone_id: zone_id.to_string(),
            has_wind_offshore,
            dst: DstRule::None,
            dst_hour: 2,
            columns: ColumnMap {
                timestamp: "timestamp".into(),
                price: "price".into(),
                load: "load".into(),
                solar: "solar".into(),
                wind_on: "wind_on".into(),
                wind_off: has_wind_offshore.then(|| "wind_off".into()),
                ngas: "ngas".into(),
                oil: "oil".into(),
                coal: "coal".into(),
                eua: "eua".into(),
            },
            impute_pairs: BTreeMap::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let c = &self.columns;
        match (self.has_wind_offshore, &c.wind_off) {
            (true, None) => {
                return Err(EpfError::Schema(
                    "has_wind_offshore = true but no wind_off column mapped".into(),
                ))
            }
            (false, Some(col)) => {
                return Err(EpfError::Schema(format!(
                    "wind_off mapped to `{col}` but has_wind_offshore = false"
                )))
            }
            _ => {}
        }
        if self.dst_hour == 0 || self.dst_hour >= 23 {
            return Err(EpfError::Config(format!(
                "dst_hour must lie in 1..=22, got {}",
                self.dst_hour
            )));
        }

        let mut seen = BTreeSet::new();
        for (role, col) in self.mapped_columns() {
            if col.is_empty() {
                return Err(EpfError::Schema(format!("role `{role}` mapped to empty name")));
            }
            if !seen.insert(col) {
                return Err(EpfError::Schema(format!(
                    "column `{col}` mapped to more than one role"
                )));
            }
        }
        for (role, actual) in &self.impute_pairs {
            let parsed = HourlyRole::parse(role).ok_or_else(|| {
                EpfError::Config(format!("impute pair for unknown hourly role `{role}`"))
            })?;
            if parsed == HourlyRole::WindOff && !self.has_wind_offshore {
                return Err(EpfError::Config(
                    "impute pair for wind_off in a zone without offshore wind".into(),
                ));
            }
            if seen.contains(actual.as_str()) {
                return Err(EpfError::Schema(format!(
                    "actuals column `{actual}` collides with a mapped role"
                )));
            }
        }
        Ok(())
    }

    /// All (role, column) pairs, in a fixed order.
    pub fn mapped_columns(&self) -> Vec<(&'static str, &str)> {
        let c = &self.columns;
        let mut out = vec![
            ("timestamp", c.timestamp.as_str()),
            ("price", c.price.as_str()),
            ("load", c.load.as_str()),
            ("solar", c.solar.as_str()),
            ("wind_on", c.wind_on.as_str()),
        ];
        if let Some(w) = &c.wind_off {
            out.push(("wind_off", w.as_str()));
        }
        out.extend([
            ("ngas", c.ngas.as_str()),
            ("oil", c.oil.as_str()),
            ("coal", c.coal.as_str()),
            ("eua", c.eua.as_str()),
        ]);
        out
    }

    pub fn hourly_column(&self, role: HourlyRole) -> Option<&str> {
        let c = &self.columns;
        match role {
            HourlyRole::Price => Some(&c.price),
            HourlyRole::Solar => Some(&c.solar),
            HourlyRole::WindOn => Some(&c.wind_on),
            HourlyRole::WindOff => c.wind_off.as_deref(),
            HourlyRole::Load => Some(&c.load),
        }
    }

    pub fn hourly_roles(&self) -> Vec<HourlyRole> {
        HourlyRole::ALL
            .into_iter()
            .filter(|r| *r != HourlyRole::WindOff || self.has_wind_offshore)
            .collect()
    }

    /// Actuals column paired with `role` for regression imputation.
    pub fn impute_pair(&self, role: HourlyRole) -> Option<&str> {
        self.impute_pairs.get(role.name()).map(String::as_str)
    }
}
