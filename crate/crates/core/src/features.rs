//! Per-day design vectors for the reduced (per-hour) and full (shared)
//! regressor sets, plus the standardizing [`Scaler`].
//!
//! Full layout, in order:
//!
//! | block            | width   |
//! |------------------|---------|
//! | `P(d-1, 0..24)`  | 24      |
//! | `P(d-2, 0..24)`  | 24      |
//! | `P(d-7, 0..24)`  | 24      |
//! | `Solar(d, ..)`   | 24      |
//! | `WindOn(d, ..)`  | 24      |
//! | `WindOff(d, ..)` | 24, only when the zone has offshore wind |
//! | `Load(d, ..)`    | 24      |
//! | Oil, Coal, EUA, NGas at `d-2` | 4 |
//! | Mon, Sat, Sun    | 3       |
//!
//! The reduced vector of hour `h` is a selection of full columns:
//! `[P(d-1,h), P(d-2,h), P(d-7,h), P(d-1,23), Solar(h), WindOn(h), (WindOff(h)),
//! Load(h), Oil, Coal, EUA, NGas, Mon, Sat, Sun]`, with the `P(d-1,23)` slot
//! dropped at `h = 23` where it would repeat the own lag.

use std::fmt::Write as _;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{EpfError, Result};
use crate::marketdata::{calendar_dummies, Commodity, DayHours, HourlyRole, MarketSeries, HOURS};

/// Commodity order inside the design vectors.
const COMMODITY_ORDER: [Commodity; 4] = [Commodity::Oil, Commodity::Coal, Commodity::Eua, Commodity::NGas];

/// Column layout shared by every design built for one zone.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub has_wind_offshore: bool,
    pub full_names: Vec<String>,
    /// For each hour, the full-vector columns forming its reduced vector.
    pub reduced_index: Vec<Vec<usize>>,
    /// Columns holding 0/1 calendar dummies.
    pub dummy_columns: Vec<usize>,
}

impl FeatureLayout {
    pub fn new(has_wind_offshore: bool) -> Self {
        let mut names = Vec::new();
        for lag in [1, 2, 7] {
            names.extend((0..HOURS).map(|h| format!("P[d-{lag},{h}]")));
        }
        let mut fundamentals = vec!["Solar", "WindOn"];
        if has_wind_offshore {
            fundamentals.push("WindOff");
        }
        fundamentals.push("Load");
        for f in &fundamentals {
            names.extend((0..HOURS).map(|h| format!("{f}[d,{h}]")));
        }
        let commodity_start = names.len();
        names.extend(["Oil[d-2]", "Coal[d-2]", "EUA[d-2]", "NGas[d-2]"].map(String::from));
        let cal_start = names.len();
        names.extend(["Mon[d]", "Sat[d]", "Sun[d]"].map(String::from));

        let reduced_index = (0..HOURS)
            .map(|h| {
                let mut idx = vec![h, HOURS + h, 2 * HOURS + h];
                if h != HOURS - 1 {
                    idx.push(HOURS - 1);
                }
                for f in 0..fundamentals.len() {
                    idx.push(3 * HOURS + f * HOURS + h);
                }
                idx.extend(commodity_start..commodity_start + 4);
                idx.extend(cal_start..cal_start + 3);
                idx
            })
            .collect();
        Self {
            has_wind_offshore,
            full_names: names,
            reduced_index,
            dummy_columns: (cal_start..cal_start + 3).collect(),
        }
    }

    pub fn full_width(&self) -> usize {
        self.full_names.len()
    }

    pub fn reduced_width(&self, hour: usize) -> usize {
        self.reduced_index[hour].len()
    }

    pub fn reduced_widths(&self) -> Vec<usize> {
        self.reduced_index.iter().map(Vec::len).collect()
    }

    /// Column offset of the `P(d-1, .)` block, used by the naive forecast.
    pub fn lag1_block(&self) -> std::ops::Range<usize> {
        0..HOURS
    }

    pub fn lag7_block(&self) -> std::ops::Range<usize> {
        2 * HOURS..3 * HOURS
    }

    /// Text artifact mapping every column index to its regressor name.
    pub fn feature_map(&self) -> String {
        let mut out = String::from("# full design\n");
        for (i, n) in self.full_names.iter().enumerate() {
            let _ = writeln!(out, "{i}\t{n}");
        }
        for (h, idx) in self.reduced_index.iter().enumerate() {
            let _ = writeln!(out, "# reduced design, hour {h}");
            for (j, &c) in idx.iter().enumerate() {
                let _ = writeln!(out, "{j}\t{}", self.full_names[c]);
            }
        }
        out
    }
}

/// Regressors and targets for one delivery day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayDesign {
    pub date: NaiveDate,
    pub reduced_x: Vec<Vec<f64>>,
    pub full_x: Vec<f64>,
    pub targets: DayHours,
    /// False when some lag reaches before the start of the series; lag slots
    /// of invalid designs hold NaN.
    pub valid: bool,
}

impl DayDesign {
    fn from_full(date: NaiveDate, full_x: Vec<f64>, targets: DayHours, layout: &FeatureLayout, valid: bool) -> Self {
        let reduced_x = layout
            .reduced_index
            .iter()
            .map(|idx| idx.iter().map(|&i| full_x[i]).collect())
            .collect();
        Self {
            date,
            reduced_x,
            full_x,
            targets,
            valid,
        }
    }
}

/// Design of day index `d`. Days before index 7 are returned with
/// `valid = false`.
pub fn design_for_day(series: &MarketSeries, layout: &FeatureLayout, d: usize) -> Result<DayDesign> {
    if layout.has_wind_offshore != series.has_wind_offshore() {
        return Err(EpfError::InvalidArgument(
            "feature layout and series disagree on offshore wind".into(),
        ));
    }
    if d >= series.n_days() {
        return Err(EpfError::InvalidArgument(format!("day index {d} out of range")));
    }
    let lag = |k: usize| -> Option<&DayHours> { d.checked_sub(k).map(|i| &series.price[i]) };
    let mut x = Vec::with_capacity(layout.full_width());
    for k in [1, 2, 7] {
        match lag(k) {
            Some(p) => x.extend_from_slice(p),
            None => x.extend(std::iter::repeat_n(f64::NAN, HOURS)),
        }
    }
    for role in [HourlyRole::Solar, HourlyRole::WindOn, HourlyRole::WindOff, HourlyRole::Load] {
        if let Some(v) = series.hourly(role) {
            x.extend_from_slice(&v[d]);
        }
    }
    for c in COMMODITY_ORDER {
        x.push(d.checked_sub(2).map_or(f64::NAN, |i| series.commodity(c)[i]));
    }
    x.extend(calendar_dummies(series.days[d]).as_f64());
    debug_assert_eq!(x.len(), layout.full_width());
    Ok(DayDesign::from_full(series.days[d], x, series.price[d], layout, d >= 7))
}

/// One valid design per day from the eighth day on.
pub fn build_designs(series: &MarketSeries, layout: &FeatureLayout) -> Result<Vec<DayDesign>> {
    if series.n_days() < 8 {
        return Err(EpfError::InvalidArgument(format!(
            "need at least 8 days to build designs, got {}",
            series.n_days()
        )));
    }
    (7..series.n_days())
        .map(|d| design_for_day(series, layout, d))
        .collect()
}

/// Column means and population standard deviations of the full design.
///
/// Reduced vectors are standardized with the statistics of the full column
/// they were copied from, so both views stay value-consistent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub window: (NaiveDate, NaiveDate),
    pub n_days: usize,
}

const DEGENERATE_STD: f64 = 1e-12;

pub fn fit_scaler(designs: &[DayDesign], layout: &FeatureLayout) -> Result<Scaler> {
    let first = designs
        .first()
        .ok_or_else(|| EpfError::InvalidArgument("cannot fit scaler on an empty window".into()))?;
    let width = layout.full_width();
    if let Some(bad) = designs.iter().find(|d| !d.valid) {
        return Err(EpfError::InvalidArgument(format!(
            "invalid design for {} in scaler window",
            bad.date
        )));
    }
    let n = designs.len() as f64;
    let mut mean = vec![0.0; width];
    for d in designs {
        if d.full_x.len() != width {
            return Err(EpfError::dim(width, d.full_x.len(), "scaler fit"));
        }
        for (m, x) in mean.iter_mut().zip(&d.full_x) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; width];
    for d in designs {
        for ((v, x), m) in var.iter_mut().zip(&d.full_x).zip(&mean) {
            *v += (x - m).powi(2);
        }
    }
    let mut std: Vec<f64> = var.iter().map(|v| (v / n).sqrt()).collect();
    for (j, s) in std.iter_mut().enumerate() {
        if layout.dummy_columns.contains(&j) || *s < DEGENERATE_STD {
            *s = 1.0;
        }
    }
    Ok(Scaler {
        mean,
        std,
        window: (first.date, designs.last().expect("non-empty").date),
        n_days: designs.len(),
    })
}

impl Scaler {
    pub fn transform(&self, design: &DayDesign, layout: &FeatureLayout) -> Result<DayDesign> {
        if design.full_x.len() != self.mean.len() || layout.full_width() != self.mean.len() {
            return Err(EpfError::dim(self.mean.len(), design.full_x.len(), "scaler transform"));
        }
        let full: Vec<f64> = design
            .full_x
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(x, (m, s))| (x - m) / s)
            .collect();
        Ok(DayDesign::from_full(design.date, full, design.targets, layout, design.valid))
    }

    pub fn inverse_transform(&self, design: &DayDesign, layout: &FeatureLayout) -> Result<DayDesign> {
        if design.full_x.len() != self.mean.len() {
            return Err(EpfError::dim(self.mean.len(), design.full_x.len(), "scaler inverse"));
        }
        let full: Vec<f64> = design
            .full_x
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(z, (m, s))| z * s + m)
            .collect();
        Ok(DayDesign::from_full(design.date, full, design.targets, layout, design.valid))
    }

    pub fn transform_all(&self, designs: &[DayDesign], layout: &FeatureLayout) -> Result<Vec<DayDesign>> {
        designs.iter().map(|d| self.transform(d, layout)).collect()
    }
}

/// Free-function form of [`Scaler::transform`].
pub fn transform(design: &DayDesign, scaler: &Scaler, layout: &FeatureLayout) -> Result<DayDesign> {
    scaler.transform(design, layout)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marketdata::{generate_synthetic, SyntheticSpec};
    use proptest::prelude::*;

    fn toy_designs(values: &[[f64; 2]], layout: &FeatureLayout) -> Vec<DayDesign> {
        // Only the first two columns vary; the rest stay zero.
        values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let mut x = vec![0.0; layout.full_width()];
                x[0] = v[0];
                x[1] = v[1];
                let date = NaiveDate::from_ymd_opt(2024, 1, 1).unwrap() + chrono::Duration::days(i as i64);
                DayDesign::from_full(date, x, [0.0; 24], layout, true)
            })
            .collect()
    }

    #[test]
    fn layout_widths() {
        let de = FeatureLayout::new(true);
        assert_eq!(de.full_width(), 175);
        assert_eq!(de.reduced_width(5), 15);
        assert_eq!(de.reduced_width(23), 14);
        let es = FeatureLayout::new(false);
        assert_eq!(es.reduced_width(5), 14);
        assert_eq!(es.reduced_width(23), 13);
        // 3 x 24 lags + 3 x 24 fundamentals + 4 commodities + 3 dummies
        assert_eq!(es.full_width(), 151);
    }

    #[test]
    fn reduced_names_follow_documented_order() {
        let l = FeatureLayout::new(true);
        let names: Vec<&str> = l.reduced_index[5].iter().map(|&i| l.full_names[i].as_str()).collect();
        assert_eq!(
            names,
            vec![
                "P[d-1,5]", "P[d-2,5]", "P[d-7,5]", "P[d-1,23]", "Solar[d,5]", "WindOn[d,5]",
                "WindOff[d,5]", "Load[d,5]", "Oil[d-2]", "Coal[d-2]", "EUA[d-2]", "NGas[d-2]",
                "Mon[d]", "Sat[d]", "Sun[d]"
            ]
        );
        let last: Vec<&str> = l.reduced_index[23].iter().take(4).map(|&i| l.full_names[i].as_str()).collect();
        assert_eq!(last, vec!["P[d-1,23]", "P[d-2,23]", "P[d-7,23]", "Solar[d,23]"]);
        assert!(l.feature_map().contains("174\tSun[d]"));
    }

    #[test]
    fn designs_carry_lags_and_commodities() {
        let m = generate_synthetic(40, 1, &SyntheticSpec::default()).unwrap();
        let s = &m.series;
        let layout = FeatureLayout::new(true);
        let designs = build_designs(s, &layout).unwrap();
        assert_eq!(designs.len(), 33);
        let d = &designs[5]; // day index 12
        assert_eq!(d.date, s.days[12]);
        assert_eq!(d.reduced_x[3][0], s.price[11][3]);
        assert_eq!(d.reduced_x[3][1], s.price[10][3]);
        assert_eq!(d.reduced_x[3][2], s.price[5][3]);
        assert_eq!(d.reduced_x[3][3], s.price[11][23]);
        assert_eq!(d.reduced_x[3][8], s.oil[10]);
        assert_eq!(d.reduced_x[3][11], s.ngas[10]);
        assert_eq!(d.targets, s.price[12]);
        assert!(designs.iter().all(|d| d.valid));
    }

    #[test]
    fn early_days_invalid() {
        let m = generate_synthetic(30, 1, &SyntheticSpec::default()).unwrap();
        let layout = FeatureLayout::new(true);
        for d in 0..7 {
            assert!(!design_for_day(&m.series, &layout, d).unwrap().valid);
        }
        assert!(design_for_day(&m.series, &layout, 7).unwrap().valid);
        let short = m.series.slice_dates(m.series.days[0], m.series.days[6]).unwrap();
        assert!(build_designs(&short, &layout).is_err());
    }

    #[test]
    fn scaler_population_moments() {
        let layout = FeatureLayout::new(true);
        let designs = toy_designs(&[[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]], &layout);
        let sc = fit_scaler(&designs, &layout).unwrap();
        assert!((sc.mean[0] - 2.0).abs() < 1e-15);
        assert!((sc.std[0] - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(sc.mean[1], 5.0);
        assert_eq!(sc.std[1], 1.0);
        let t = sc.transform(&designs[1], &layout).unwrap();
        assert_eq!(t.full_x[0], 0.0);
        assert_eq!(t.full_x[1], 0.0);
    }

    #[test]
    fn dummy_column_arithmetic() {
        let layout = FeatureLayout::new(true);
        let mon = layout.dummy_columns[0];
        let mut sc = fit_scaler(&toy_designs(&[[0.0, 0.0]], &layout), &layout).unwrap();
        sc.mean[mon] = 0.3;
        let mut d = toy_designs(&[[0.0, 0.0]], &layout).remove(0);
        d.full_x[mon] = 1.0;
        let t = sc.transform(&d, &layout).unwrap();
        assert!((t.full_x[mon] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn layout_mismatch_rejected() {
        let de = FeatureLayout::new(true);
        let es = FeatureLayout::new(false);
        let designs = toy_designs(&[[1.0, 2.0], [2.0, 3.0]], &de);
        let sc = fit_scaler(&designs, &de).unwrap();
        let es_design = DayDesign::from_full(designs[0].date, vec![0.0; 151], [0.0; 24], &es, true);
        assert!(matches!(
            sc.transform(&es_design, &es),
            Err(EpfError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn standardized_window_moments() {
        let m = generate_synthetic(120, 2, &SyntheticSpec::default()).unwrap();
        let layout = FeatureLayout::new(true);
        let designs = build_designs(&m.series, &layout).unwrap();
        let sc = fit_scaler(&designs, &layout).unwrap();
        let z = sc.transform_all(&designs, &layout).unwrap();
        let n = z.len() as f64;
        for j in 0..layout.full_width() {
            if layout.dummy_columns.contains(&j) || sc.std[j] == 1.0 {
                // dummies and constant columns (night-time solar) are left unscaled
                continue;
            }
            let mean = z.iter().map(|d| d.full_x[j]).sum::<f64>() / n;
            let var = z.iter().map(|d| (d.full_x[j] - mean).powi(2)).sum::<f64>() / n;
            assert!(mean.abs() < 1e-10, "column {j} mean {mean}");
            assert!((var.sqrt() - 1.0).abs() < 1e-10, "column {j} std {}", var.sqrt());
        }
    }

    #[test]
    fn reduced_matches_full_slice() {
        let m = generate_synthetic(40, 4, &SyntheticSpec { has_wind_offshore: false, ..Default::default() }).unwrap();
        let layout = FeatureLayout::new(false);
        for d in build_designs(&m.series, &layout).unwrap() {
            for h in 0..24 {
                for (j, &c) in layout.reduced_index[h].iter().enumerate() {
                    assert_eq!(d.reduced_x[h][j].to_bits(), d.full_x[c].to_bits());
                }
            }
        }
    }

    proptest! {
        #[test]
        fn transform_round_trip(seed in 0u64..50, day in 0usize..20) {
            let m = generate_synthetic(40, seed, &SyntheticSpec::default()).unwrap();
            let layout = FeatureLayout::new(true);
            let designs = build_designs(&m.series, &layout).unwrap();
            let sc = fit_scaler(&designs[..10], &layout).unwrap();
            let back = sc.inverse_transform(&sc.transform(&designs[day], &layout).unwrap(), &layout).unwrap();
            for (a, b) in back.full_x.iter().zip(&designs[day].full_x) {
                prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
            }
        }
    }
}
