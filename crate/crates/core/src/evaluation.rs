//! Accuracy metrics, the weekly-persistence naive benchmark, and the
//! Diebold-Mariano test on daily aggregate errors.

use chrono::{Datelike, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{EpfError, Result};
use crate::features::DayDesign;
use crate::marketdata::{DayHours, MarketSeries, HOURS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub rmse: f64,
    pub mae: f64,
    pub rmae: f64,
    pub hourly_rmse: [f64; HOURS],
    pub n_days: usize,
}

fn check_grids(a: &[DayHours], b: &[DayHours], what: &'static str) -> Result<()> {
    if a.is_empty() {
        return Err(EpfError::InvalidArgument(format!("{what}: no days to evaluate")));
    }
    if a.len() != b.len() {
        return Err(EpfError::dim(a.len(), b.len(), what));
    }
    Ok(())
}

/// Mean absolute error over all day-hour cells.
pub fn mae(forecasts: &[DayHours], realized: &[DayHours]) -> Result<f64> {
    check_grids(forecasts, realized, "mae")?;
    let sum: f64 = forecasts
        .iter()
        .zip(realized)
        .flat_map(|(f, r)| f.iter().zip(r).map(|(a, b)| (a - b).abs()))
        .sum();
    Ok(sum / (HOURS * forecasts.len()) as f64)
}

pub fn rmse(forecasts: &[DayHours], realized: &[DayHours]) -> Result<f64> {
    check_grids(forecasts, realized, "rmse")?;
    let sum: f64 = forecasts
        .iter()
        .zip(realized)
        .flat_map(|(f, r)| f.iter().zip(r).map(|(a, b)| (a - b).powi(2)))
        .sum();
    Ok((sum / (HOURS * forecasts.len()) as f64).sqrt())
}

/// RMSE of each delivery hour across days.
pub fn hourly_rmse(forecasts: &[DayHours], realized: &[DayHours]) -> Result<[f64; HOURS]> {
    check_grids(forecasts, realized, "hourly rmse")?;
    let mut out = [0.0; HOURS];
    for (f, r) in forecasts.iter().zip(realized) {
        for h in 0..HOURS {
            out[h] += (f[h] - r[h]).powi(2);
        }
    }
    let n = forecasts.len() as f64;
    out.iter_mut().for_each(|v| *v = (*v / n).sqrt());
    Ok(out)
}

/// MAE of the model over MAE of the naive forecast. A perfect naive
/// benchmark gives 1 for a perfect model and infinity otherwise.
pub fn rmae(forecasts: &[DayHours], realized: &[DayHours], naive: &[DayHours]) -> Result<f64> {
    let num = mae(forecasts, realized)?;
    let den = mae(naive, realized)?;
    Ok(if den > 0.0 {
        num / den
    } else if num == 0.0 {
        1.0
    } else {
        f64::INFINITY
    })
}

pub fn metrics(forecasts: &[DayHours], realized: &[DayHours], naive: &[DayHours]) -> Result<MetricReport> {
    Ok(MetricReport {
        rmse: rmse(forecasts, realized)?,
        mae: mae(forecasts, realized)?,
        rmae: rmae(forecasts, realized, naive)?,
        hourly_rmse: hourly_rmse(forecasts, realized)?,
        n_days: forecasts.len(),
    })
}

/// Lag in days used by the naive forecast for a delivery date: yesterday
/// from Tuesday to Friday, one week back on Saturday, Sunday and Monday.
pub fn naive_lag(date: NaiveDate) -> usize {
    match date.weekday() {
        Weekday::Tue | Weekday::Wed | Weekday::Thu | Weekday::Fri => 1,
        _ => 7,
    }
}

/// Naive forecast of day index `d`.
pub fn naive_forecast(series: &MarketSeries, d: usize) -> Result<DayHours> {
    if d >= series.n_days() {
        return Err(EpfError::InvalidArgument(format!("day index {d} out of range")));
    }
    let lag = naive_lag(series.days[d]);
    let src = d.checked_sub(lag).ok_or_else(|| {
        EpfError::InvalidArgument(format!("naive forecast for {} needs {lag} days of history", series.days[d]))
    })?;
    Ok(series.price[src])
}

/// Naive forecast read from the lag blocks of an unstandardized design.
pub fn naive_from_design(design: &DayDesign) -> DayHours {
    let start = if naive_lag(design.date) == 1 { 0 } else { 2 * HOURS };
    let mut out = [0.0; HOURS];
    out.copy_from_slice(&design.full_x[start..start + HOURS]);
    out
}

/// One-sided test of "A is more accurate than B".
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DmResult {
    pub statistic: f64,
    /// Lower-tail standard normal probability of the statistic.
    pub p_value: f64,
    pub n_days: usize,
    /// The loss differential had zero variance.
    pub degenerate: bool,
}

/// DM test on a given loss differential series.
pub fn dm_from_differential(d: &[f64]) -> Result<DmResult> {
    let n = d.len();
    if n < 2 {
        return Err(EpfError::InvalidArgument(format!("DM test needs at least 2 days, got {n}")));
    }
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    if var == 0.0 {
        let (statistic, p_value) = if mean == 0.0 {
            (0.0, 0.5)
        } else if mean < 0.0 {
            (f64::NEG_INFINITY, 0.0)
        } else {
            (f64::INFINITY, 1.0)
        };
        return Ok(DmResult {
            statistic,
            p_value,
            n_days: n,
            degenerate: true,
        });
    }
    let statistic = mean / (var / n as f64).sqrt();
    let normal = Normal::standard();
    Ok(DmResult {
        statistic,
        p_value: normal.cdf(statistic),
        n_days: n,
        degenerate: false,
    })
}

/// Daily summed forecast error.
fn daily_error(f: &DayHours, r: &DayHours) -> f64 {
    f.iter().sum::<f64>() - r.iter().sum::<f64>()
}

/// DM test on `|e_A| - |e_B|` with `e` the daily summed error.
pub fn dm_test(forecasts_a: &[DayHours], forecasts_b: &[DayHours], realized: &[DayHours]) -> Result<DmResult> {
    check_grids(forecasts_a, realized, "dm test")?;
    check_grids(forecasts_b, realized, "dm test")?;
    let d: Vec<f64> = forecasts_a
        .iter()
        .zip(forecasts_b)
        .zip(realized)
        .map(|((a, b), r)| daily_error(a, r).abs() - daily_error(b, r).abs())
        .collect();
    dm_from_differential(&d)
}

/// Pairwise p-values: entry `(i, j)` tests "model i beats model j".
pub fn dm_matrix(models: &[&[DayHours]], realized: &[DayHours]) -> Result<Vec<Vec<f64>>> {
    models
        .iter()
        .map(|a| models.iter().map(|b| Ok(dm_test(a, b, realized)?.p_value)).collect())
        .collect()
}

/// Flags points not dominated in (runtime, mae); lower is better in both.
pub fn pareto_front(points: &[(f64, f64)]) -> Vec<bool> {
    points
        .iter()
        .map(|&(t, m)| {
            !points
                .iter()
                .any(|&(t2, m2)| t2 <= t && m2 <= m && (t2 < t || m2 < m))
        })
        .collect()
}
