use std::collections::BTreeSet;

use chrono::Datelike;
use serde::{Deserialize, Serialize};

use crate::error::{EpfError, Result};
use crate::marketdata::config::{DstRule, ZoneConfig};
use crate::marketdata::ingest::RawMarketData;
use crate::marketdata::{dst_dates, DayHours, HourlyRole, MarketSeries, HOURS};

/// Counts of imputed cells per rule, written next to the cleaned data.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleaningLog {
    pub commodity_locf_fills: usize,
    pub regression_fills: usize,
    pub hourly_locf_fills: usize,
    pub dst_spring_fills: usize,
    pub dst_fall_merges: usize,
    pub warnings: Vec<String>,
}

impl CleaningLog {
    pub fn total_fills(&self) -> usize {
        self.commodity_locf_fills
            + self.regression_fills
            + self.hourly_locf_fills
            + self.dst_spring_fills
            + self.dst_fall_merges
    }
}

/// Last observation carried forward.
pub fn impute_locf(series: &[Option<f64>]) -> Result<Vec<f64>> {
    let mut last = match series.first() {
        Some(Some(v)) => *v,
        Some(None) => {
            return Err(EpfError::Data(
                "leading missing value has no predecessor to carry forward".into(),
            ))
        }
        None => return Ok(Vec::new()),
    };
    Ok(series
        .iter()
        .map(|v| {
            if let Some(x) = v {
                last = *x;
            }
            last
        })
        .collect())
}

/// Result of [`impute_regression`].
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionFill {
    pub values: Vec<f64>,
    pub intercept: f64,
    pub slope: f64,
    pub regression_fills: usize,
    /// Gaps where the predictor was also missing and the previous value was
    /// carried forward instead.
    pub locf_fallbacks: usize,
}

/// Fills gaps in `target` with the least-squares line `a + b * predictor`
/// fitted on all positions where both series are observed.
pub fn impute_regression(target: &[Option<f64>], predictor: &[Option<f64>]) -> Result<RegressionFill> {
    if target.len() != predictor.len() {
        return Err(EpfError::dim(target.len(), predictor.len(), "regression imputation"));
    }
    let pairs: Vec<(f64, f64)> = target
        .iter()
        .zip(predictor)
        .filter_map(|(y, x)| Some(((*x)?, (*y)?)))
        .collect();
    if pairs.len() < 2 {
        return Err(EpfError::Data(format!(
            "regression imputation needs at least 2 complete pairs, found {}",
            pairs.len()
        )));
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pairs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;

    let mut values = Vec::with_capacity(target.len());
    let mut regression_fills = 0;
    let mut locf_fallbacks = 0;
    for (i, (y, x)) in target.iter().zip(predictor).enumerate() {
        let v = match (y, x) {
            (Some(y), _) => *y,
            (None, Some(x)) => {
                regression_fills += 1;
                intercept + slope * x
            }
            (None, None) => {
                locf_fallbacks += 1;
                *values.last().ok_or_else(|| {
                    EpfError::Data(format!(
                        "position {i}: target and predictor both missing with no predecessor"
                    ))
                })?
            }
        };
        values.push(v);
    }
    Ok(RegressionFill {
        values,
        intercept,
        slope,
        regression_fills,
        locf_fallbacks,
    })
}

fn spring_day(raw: &RawMarketData, config: &ZoneConfig, d: usize) -> bool {
    config.dst == DstRule::Eu && raw.days[d] == dst_dates(raw.days[d].year()).0
}

/// Brings every day to 24 hourly slots.
///
/// On the spring-forward date the skipped hour is the mean of the hours on
/// either side; on the fall-back date the two readings of the repeated hour
/// are averaged. Other days pass through untouched. Returns the number of
/// spring days filled and fall days merged.
pub fn normalize_dst(raw: &RawMarketData, config: &ZoneConfig) -> Result<(RawMarketData, usize, usize)> {
    let mut out = raw.clone();
    let h = config.dst_hour as usize;
    let mut spring = 0;
    for d in 0..out.days.len() {
        if !spring_day(raw, config, d) {
            continue;
        }
        let mut filled = false;
        for (col, grid) in out.hourly.iter_mut() {
            let day = &mut grid[d];
            if day[h].is_some() {
                continue;
            }
            match (day[h - 1], day[h + 1]) {
                (Some(a), Some(b)) => {
                    day[h] = Some(0.5 * (a + b));
                    filled = true;
                }
                _ => {
                    return Err(EpfError::Data(format!(
                        "{}: `{col}` missing next to the skipped DST hour",
                        raw.days[d]
                    )))
                }
            }
        }
        spring += usize::from(filled);
    }

    let mut fall = 0;
    for (&d, readings) in &raw.repeated_hour {
        for (col, second) in readings {
            if let Some(grid) = out.hourly.get_mut(col) {
                let first = grid[d][h];
                grid[d][h] = match (first, second) {
                    (Some(a), Some(b)) => Some(0.5 * (a + b)),
                    (a, b) => a.or(*b),
                };
            }
        }
        fall += 1;
    }
    out.repeated_hour.clear();
    Ok((out, spring, fall))
}

/// Full cleaning pipeline: commodity LOCF, regression (or LOCF) imputation of
/// hourly gaps, then DST normalization. The spring-forward slot is masked
/// during imputation so that it is filled by the adjacent-hour rule.
pub fn clean(raw: RawMarketData, config: &ZoneConfig) -> Result<(MarketSeries, CleaningLog)> {
    let mut log = CleaningLog::default();
    let mut raw = raw;
    let n = raw.days.len();

    let mut commodities = Vec::new();
    for col in [
        &config.columns.ngas,
        &config.columns.oil,
        &config.columns.coal,
        &config.columns.eua,
    ] {
        let values = raw
            .daily
            .get(col)
            .ok_or_else(|| EpfError::Schema(format!("commodity column `{col}` not loaded")))?;
        log.commodity_locf_fills += values.iter().filter(|v| v.is_none()).count();
        let filled = impute_locf(values)
            .map_err(|e| EpfError::Data(format!("commodity `{col}`: {e}")))?;
        commodities.push(filled);
    }

    let h_dst = config.dst_hour as usize;
    let masked: BTreeSet<usize> = (0..n)
        .filter(|&d| spring_day(&raw, config, d))
        .map(|d| d * HOURS + h_dst)
        .collect();
    let flatten = |grid: &[[Option<f64>; 24]]| -> Vec<(usize, Option<f64>)> {
        grid.iter()
            .flatten()
            .copied()
            .enumerate()
            .filter(|(i, _)| !masked.contains(i))
            .collect()
    };

    for role in config.hourly_roles() {
        let col = config.hourly_column(role).expect("role mapped").to_string();
        let grid = raw
            .hourly
            .get(&col)
            .ok_or_else(|| EpfError::Schema(format!("hourly column `{col}` not loaded")))?;
        let target = flatten(grid);
        let gaps = target.iter().filter(|(_, v)| v.is_none()).count();
        if gaps == 0 {
            continue;
        }
        let target_values: Vec<Option<f64>> = target.iter().map(|(_, v)| *v).collect();
        let filled: Vec<f64> = match config.impute_pair(role) {
            Some(actual) => {
                let pgrid = raw.hourly.get(actual).ok_or_else(|| {
                    EpfError::Schema(format!("actuals column `{actual}` not loaded"))
                })?;
                let predictor: Vec<Option<f64>> = flatten(pgrid).into_iter().map(|(_, v)| v).collect();
                let fit = impute_regression(&target_values, &predictor)
                    .map_err(|e| EpfError::Data(format!("`{col}`: {e}")))?;
                log.regression_fills += fit.regression_fills;
                if fit.locf_fallbacks > 0 {
                    log.hourly_locf_fills += fit.locf_fallbacks;
                    log.warnings.push(format!(
                        "`{col}`: {} gaps without `{actual}` value filled by LOCF",
                        fit.locf_fallbacks
                    ));
                }
                fit.values
            }
            None => {
                log.hourly_locf_fills += gaps;
                log.warnings.push(format!(
                    "`{col}`: {gaps} gaps filled by LOCF (no imputation pair declared)"
                ));
                impute_locf(&target_values).map_err(|e| EpfError::Data(format!("`{col}`: {e}")))?
            }
        };
        let grid = raw.hourly.get_mut(&col).expect("checked above");
        for ((flat, _), v) in target.iter().zip(filled) {
            grid[flat / HOURS][flat % HOURS] = Some(v);
        }
    }

    let (normalized, spring, fall) = normalize_dst(&raw, config)?;
    log.dst_spring_fills = spring;
    log.dst_fall_merges = fall;

    let take = |role: HourlyRole| -> Result<Vec<DayHours>> {
        let col = config.hourly_column(role).expect("role mapped");
        normalized.hourly[col]
            .iter()
            .zip(&normalized.days)
            .map(|(day, date)| {
                let mut out = [0.0; HOURS];
                for (h, v) in day.iter().enumerate() {
                    out[h] = v.ok_or_else(|| {
                        EpfError::Data(format!("{date} hour {h}: `{col}` still missing"))
                    })?;
                }
                Ok(out)
            })
            .collect()
    };

    let mut commodities = commodities.into_iter();
    let series = MarketSeries {
        zone_id: config.zone_id.clone(),
        days: normalized.days.clone(),
        price: take(HourlyRole::Price)?,
        solar: take(HourlyRole::Solar)?,
        wind_on: take(HourlyRole::WindOn)?,
        wind_off: if config.has_wind_offshore {
            Some(take(HourlyRole::WindOff)?)
        } else {
            None
        },
        load: take(HourlyRole::Load)?,
        ngas: commodities.next().expect("ngas"),
        oil: commodities.next().expect("oil"),
        coal: commodities.next().expect("coal"),
        eua: commodities.next().expect("eua"),
    };
    series.validate()?;
    Ok((series, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marketdata::parse_csv;
    use chrono::NaiveDate;
    use std::fmt::Write as _;

    #[test]
    fn locf_examples() {
        assert_eq!(
            impute_locf(&[Some(1.0), None, None, Some(2.0)]).unwrap(),
            vec![1.0, 1.0, 1.0, 2.0]
        );
        assert!(impute_locf(&[None, Some(1.0)]).is_err());
        assert_eq!(impute_locf(&[Some(3.0), Some(4.0)]).unwrap(), vec![3.0, 4.0]);
    }

    #[test]
    fn regression_perfect_fit() {
        let pred: Vec<Option<f64>> = (0..10).map(|i| Some(i as f64 * 1.5)).collect();
        let mut target = pred.clone();
        target[3] = None;
        target[7] = None;
        let fit = impute_regression(&target, &pred).unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-12);
        assert!(fit.intercept.abs() < 1e-12);
        assert!((fit.values[3] - 4.5).abs() < 1e-12);
        assert!((fit.values[7] - 10.5).abs() < 1e-12);
        assert_eq!(fit.regression_fills, 2);
    }

    #[test]
    fn regression_two_points() {
        // Line through (1, 2) and (2, 4) is y = 2x, so x = 3 gives 6.
        let fit = impute_regression(&[Some(2.0), Some(4.0), None], &[Some(1.0), Some(2.0), Some(3.0)])
            .unwrap();
        assert!((fit.values[2] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn regression_constant_predictor_uses_target_mean() {
        // Normal equations with a constant regressor: slope drops out and the
        // intercept is the mean of the observed targets.
        let fit = impute_regression(
            &[Some(1.0), Some(2.0), Some(6.0), None],
            &[Some(5.0), Some(5.0), Some(5.0), Some(5.0)],
        )
        .unwrap();
        assert_eq!(fit.slope, 0.0);
        assert!((fit.values[3] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn regression_falls_back_to_locf() {
        let fit = impute_regression(
            &[Some(1.0), Some(2.0), Some(3.0), None],
            &[Some(1.0), Some(2.0), Some(3.0), None],
        )
        .unwrap();
        assert_eq!(fit.values[3], 3.0);
        assert_eq!(fit.locf_fallbacks, 1);
    }

    #[test]
    fn regression_needs_two_pairs() {
        assert!(impute_regression(&[Some(1.0), None], &[Some(1.0), Some(2.0)]).is_err());
    }

    fn eu_config() -> ZoneConfig {
        let mut cfg = ZoneConfig::canonical("ES", false);
        cfg.dst = DstRule::Eu;
        cfg
    }

    fn day_csv(date: NaiveDate, hours: &[usize], price: impl Fn(usize) -> String) -> String {
        let mut s = String::new();
        for &h in hours {
            writeln!(s, "{date}T{h:02}:00,{},500,0,100,20,70,100,60", price(h)).unwrap();
        }
        s
    }

    const HEADER: &str = "timestamp,price,load,solar,wind_on,ngas,oil,coal,eua\n";

    #[test]
    fn spring_hour_is_adjacent_mean() {
        let date = NaiveDate::from_ymd_opt(2025, 3, 30).unwrap();
        let hours: Vec<usize> = (0..24).filter(|&h| h != 2).collect();
        let text = format!(
            "{HEADER}{}",
            day_csv(date, &hours, |h| match h {
                1 => "10".into(),
                3 => "14".into(),
                _ => "50".into(),
            })
        );
        let raw = parse_csv(text.as_bytes(), &eu_config()).unwrap();
        let (norm, spring, fall) = normalize_dst(&raw, &eu_config()).unwrap();
        assert_eq!(norm.hourly["price"][0][2], Some(12.0));
        assert_eq!((spring, fall), (1, 0));
        let (series, log) = clean(raw, &eu_config()).unwrap();
        assert_eq!(series.price[0][2], 12.0);
        assert_eq!(log.dst_spring_fills, 1);
        assert_eq!(log.hourly_locf_fills, 0);
    }

    #[test]
    fn spring_with_missing_neighbour_fails() {
        let date = NaiveDate::from_ymd_opt(2025, 3, 30).unwrap();
        let hours: Vec<usize> = (0..24).filter(|&h| h != 2 && h != 3).collect();
        let text = format!("{HEADER}{}", day_csv(date, &hours, |_| "50".into()));
        let raw = parse_csv(text.as_bytes(), &eu_config()).unwrap();
        assert!(matches!(normalize_dst(&raw, &eu_config()), Err(EpfError::Data(_))));
    }

    #[test]
    fn fall_duplicates_are_averaged() {
        let date = NaiveDate::from_ymd_opt(2025, 10, 26).unwrap();
        let all: Vec<usize> = (0..24).collect();
        let mut text = format!(
            "{HEADER}{}",
            day_csv(date, &all, |h| if h == 2 { "8".into() } else { "50".into() })
        );
        text.push_str(&day_csv(date, &[2], |_| "10".into()));
        let raw = parse_csv(text.as_bytes(), &eu_config()).unwrap();
        let (series, log) = clean(raw, &eu_config()).unwrap();
        assert_eq!(series.price[0][2], 9.0);
        assert_eq!(log.dst_fall_merges, 1);
        assert_eq!(series.price[0].len(), 24);
    }

    #[test]
    fn ordinary_day_unchanged() {
        let date = NaiveDate::from_ymd_opt(2025, 5, 6).unwrap();
        let all: Vec<usize> = (0..24).collect();
        let text = format!("{HEADER}{}", day_csv(date, &all, |h| h.to_string()));
        let raw = parse_csv(text.as_bytes(), &eu_config()).unwrap();
        let (norm, spring, fall) = normalize_dst(&raw, &eu_config()).unwrap();
        assert_eq!(norm, raw);
        assert_eq!((spring, fall), (0, 0));
    }

    #[test]
    fn commodity_gaps_counted() {
        let start = NaiveDate::from_ymd_opt(2025, 5, 5).unwrap();
        let mut text = String::from(HEADER);
        for (d, date) in start.iter_days().take(5).enumerate() {
            for h in 0..24 {
                let gas = if (1..=3).contains(&d) { "NA".to_string() } else { "20".into() };
                writeln!(text, "{date}T{h:02}:00,50,500,0,100,{gas},70,100,60").unwrap();
            }
        }
        let raw = parse_csv(text.as_bytes(), &eu_config()).unwrap();
        let (series, log) = clean(raw, &eu_config()).unwrap();
        assert_eq!(log.commodity_locf_fills, 3);
        assert_eq!(series.ngas, vec![20.0; 5]);
        assert_eq!(series.count_missing(), 0);
    }

    #[test]
    fn regression_pairs_declared_in_config() {
        let mut cfg = eu_config();
        cfg.impute_pairs.insert("load".into(), "load_actual".into());
        let start = NaiveDate::from_ymd_opt(2025, 5, 5).unwrap();
        let mut text = String::from("timestamp,price,load,solar,wind_on,ngas,oil,coal,eua,load_actual\n");
        for date in start.iter_days().take(2) {
            for h in 0..24 {
                let actual = 400.0 + h as f64;
                let load = if h == 5 { "NA".to_string() } else { (2.0 * actual).to_string() };
                writeln!(text, "{date}T{h:02}:00,50,{load},0,100,20,70,100,60,{actual}").unwrap();
            }
        }
        let raw = parse_csv(text.as_bytes(), &cfg).unwrap();
        let (series, log) = clean(raw, &cfg).unwrap();
        assert_eq!(log.regression_fills, 2);
        assert!((series.load[0][5] - 810.0).abs() < 1e-9);
    }
}
