//! Synthetic market with planted structure.
//!
//! Fundamentals follow daily and annual cycles with autoregressive weather
//! noise, commodities are mean-reverting in logs, and the price of each hour
//! is a known linear function of the same regressors the reduced design uses
//! (own lags, last-hour lag, fundamentals, commodities at `d - 2`, calendar
//! dummies), optionally plus a multiplicative load x solar interaction and
//! Gaussian noise.

use std::f64::consts::PI;

use chrono::{Datelike, NaiveDate};
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{EpfError, Result};
use crate::marketdata::{calendar_dummies, DayHours, MarketSeries, HOURS};
use crate::seed::rng_from_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub zone_id: String,
    pub has_wind_offshore: bool,
    pub start: NaiveDate,
    /// Standard deviation of the additive price noise, EUR/MWh.
    pub noise_scale: f64,
    /// Weight of the planted `load_dev * solar_dev` interaction, EUR/MWh.
    pub nonlinearity: f64,
    /// Days simulated and discarded before the first returned day.
    pub burn_in: usize,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            zone_id: "SYN".into(),
            has_wind_offshore: true,
            start: NaiveDate::from_ymd_opt(2019, 1, 7).expect("valid date"),
            noise_scale: 3.0,
            nonlinearity: 0.0,
            burn_in: 28,
        }
    }
}

/// Coefficients that generated the prices, laid out like the reduced
/// design of each hour: `[P(d-1,h), P(d-2,h), P(d-7,h), P(d-1,23) (h < 23),
/// Solar, WindOn, (WindOff), Load, Oil, Coal, EUA, NGas, Mon, Sat, Sun]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratingCoefficients {
    pub intercept: Vec<f64>,
    pub slopes: Vec<Vec<f64>>,
    pub nonlinearity: f64,
    /// (centre, scale) used to form the load deviation of the interaction.
    pub load_ref: (f64, f64),
    /// (centre, scale) used to form the solar deviation of the interaction.
    pub solar_ref: (f64, f64),
}

impl GeneratingCoefficients {
    /// Value of the planted interaction term for one hour.
    pub fn interaction(&self, load: f64, solar: f64) -> f64 {
        self.nonlinearity
            * ((load - self.load_ref.0) / self.load_ref.1)
            * ((solar - self.solar_ref.0) / self.solar_ref.1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticMarket {
    pub series: MarketSeries,
    pub coefficients: GeneratingCoefficients,
}

fn coefficients(spec: &SyntheticSpec) -> GeneratingCoefficients {
    let mut intercept = Vec::with_capacity(HOURS);
    let mut slopes = Vec::with_capacity(HOURS);
    for h in 0..HOURS {
        let phase = 2.0 * PI * h as f64 / 24.0;
        let lag1 = 0.40 + 0.05 * phase.sin();
        let lag2 = 0.10;
        let lag7 = 0.15;
        let last = 0.05;
        intercept.push(-25.0 + 6.0 * (phase - PI / 2.0).sin());
        let mut row = vec![lag1, lag2, lag7];
        if h < HOURS - 1 {
            row.push(last);
        } else {
            // P(d-1,23) is the own lag at h = 23; the two effects merge.
            row[0] += last;
        }
        row.push(-0.0009);
        row.push(-0.0006);
        if spec.has_wind_offshore {
            row.push(-0.0008);
        }
        row.push(0.0008);
        row.extend([0.05, 0.03, 0.12, 0.35]);
        row.extend([-2.0, -4.0, -7.0]);
        slopes.push(row);
    }
    GeneratingCoefficients {
        intercept,
        slopes,
        nonlinearity: spec.nonlinearity,
        load_ref: (50_000.0, 9_000.0),
        solar_ref: (6_000.0, 7_000.0),
    }
}

/// Generates `n_days` of synthetic market data. Deterministic given `seed`.
pub fn generate_synthetic(n_days: usize, seed: u64, spec: &SyntheticSpec) -> Result<SyntheticMarket> {
    if n_days < 30 {
        return Err(EpfError::InvalidArgument(format!(
            "synthetic series needs at least 30 days, got {n_days}"
        )));
    }
    let coefs = coefficients(spec);
    let mut rng = rng_from_seed(seed);
    let std_normal = Normal::new(0.0, 1.0).expect("valid normal");
    let cloud = Uniform::new(0.25, 1.0);

    let total = n_days + spec.burn_in;
    let first = spec.start - chrono::Duration::days(spec.burn_in as i64);
    let days: Vec<NaiveDate> = first.iter_days().take(total).collect();

    let mut solar = Vec::with_capacity(total);
    let mut wind_on = Vec::with_capacity(total);
    let mut wind_off = Vec::with_capacity(total);
    let mut load = Vec::with_capacity(total);
    let (mut won_state, mut woff_state) = (0.0f64, 0.0f64);
    let mut log_comm = [0.0f64; 4];
    let comm_level = [80.0, 110.0, 70.0, 30.0]; // oil, coal, eua, ngas
    let mut comm: Vec<[f64; 4]> = Vec::with_capacity(total);

    for date in &days {
        let doy = date.ordinal() as f64;
        let annual = (2.0 * PI * (doy - 80.0) / 365.25).sin();
        let sky: f64 = cloud.sample(&mut rng);
        won_state = 0.8 * won_state + 0.45 * std_normal.sample(&mut rng);
        woff_state = 0.8 * woff_state + 0.45 * std_normal.sample(&mut rng);
        let weekday = date.weekday().num_days_from_monday();
        let weekend = match weekday {
            5 => 0.88,
            6 => 0.80,
            _ => 1.0,
        };
        let mut s = [0.0; HOURS];
        let mut won = [0.0; HOURS];
        let mut woff = [0.0; HOURS];
        let mut l = [0.0; HOURS];
        for h in 0..HOURS {
            let daylight = (PI * (h as f64 - 5.5) / 13.0).sin().max(0.0);
            s[h] = 30_000.0 * (1.0 + 0.45 * annual) * sky * daylight;
            let diurnal = 1.0 + 0.08 * (2.0 * PI * (h as f64 - 3.0) / 24.0).sin();
            won[h] = 14_000.0 * (won_state - 0.2 * annual).exp() * diurnal
                + 300.0 * std_normal.sample(&mut rng);
            woff[h] = 3_500.0 * (woff_state - 0.2 * annual).exp() + 100.0 * std_normal.sample(&mut rng);
            let shape = 1.0 + 0.15 * (PI * (h as f64 - 6.0) / 14.0).sin().max(-0.6);
            l[h] = (48_000.0 - 5_000.0 * annual) * shape * weekend
                + 800.0 * std_normal.sample(&mut rng);
        }
        solar.push(s);
        wind_on.push(won);
        wind_off.push(woff);
        load.push(l);

        let mut today = [0.0; 4];
        for (k, lc) in log_comm.iter_mut().enumerate() {
            *lc = 0.97 * *lc + 0.03 * std_normal.sample(&mut rng);
            today[k] = comm_level[k] * lc.exp();
        }
        comm.push(today);
    }

    let noise = if spec.noise_scale > 0.0 {
        Some(Normal::new(0.0, spec.noise_scale).map_err(|e| EpfError::InvalidArgument(e.to_string()))?)
    } else {
        None
    };
    let mut price: Vec<DayHours> = Vec::with_capacity(total);
    for d in 0..total {
        let mut p = [0.0; HOURS];
        if d < 7 {
            for (h, v) in p.iter_mut().enumerate() {
                *v = 45.0 + 10.0 * (2.0 * PI * h as f64 / 24.0).sin();
            }
            price.push(p);
            continue;
        }
        let cal = calendar_dummies(days[d]).as_f64();
        for h in 0..HOURS {
            let mut x = vec![price[d - 1][h], price[d - 2][h], price[d - 7][h]];
            if h < HOURS - 1 {
                x.push(price[d - 1][HOURS - 1]);
            }
            x.push(solar[d][h]);
            x.push(wind_on[d][h]);
            if spec.has_wind_offshore {
                x.push(wind_off[d][h]);
            }
            x.push(load[d][h]);
            x.extend_from_slice(&comm[d - 2]);
            x.extend_from_slice(&cal);
            let linear: f64 = coefs.intercept[h]
                + coefs.slopes[h].iter().zip(&x).map(|(b, v)| b * v).sum::<f64>();
            let inter = if coefs.nonlinearity != 0.0 {
                coefs.interaction(load[d][h], solar[d][h])
            } else {
                0.0
            };
            let eps = noise.map_or(0.0, |n| n.sample(&mut rng));
            p[h] = linear + inter + eps;
        }
        price.push(p);
    }

    let keep = spec.burn_in..total;
    let take_comm = |k: usize| comm[keep.clone()].iter().map(|c| c[k]).collect::<Vec<_>>();
    let series = MarketSeries {
        zone_id: spec.zone_id.clone(),
        days: days[keep.clone()].to_vec(),
        price: price[keep.clone()].to_vec(),
        solar: solar[keep.clone()].to_vec(),
        wind_on: wind_on[keep.clone()].to_vec(),
        wind_off: spec.has_wind_offshore.then(|| wind_off[keep.clone()].to_vec()),
        load: load[keep.clone()].to_vec(),
        oil: take_comm(0),
        coal: take_comm(1),
        eua: take_comm(2),
        ngas: take_comm(3),
    };
    Ok(SyntheticMarket {
        series,
        coefficients: coefs,
    })
}
