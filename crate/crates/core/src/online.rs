//! Rolling day-ahead backtests.
//!
//! Partial online learning fits the model once on a large initial window and
//! then, for each following day, warm-starts from the previous parameters and
//! runs a few epochs on the `d_up` most recent days. The full-refit baseline
//! instead cold-starts on the last `window` days every day.

use std::time::Instant;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{EpfError, Result};
use crate::evaluation::{metrics, naive_from_design, MetricReport};
use crate::features::{fit_scaler, DayDesign, FeatureLayout, Scaler};
use crate::marketdata::DayHours;
use crate::model::{Model, ModelSpec, ParamSet};
use crate::training::{train_window, AdamState, LossKind, TrainConfig};

pub const DEFAULT_EPOCHS_INIT: usize = 60;
pub const DEFAULT_EPOCHS_UP: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OnlineSchedule {
    pub d_init: usize,
    pub d_up: usize,
    #[serde(default = "default_epochs_init")]
    pub epochs_init: usize,
    #[serde(default = "default_epochs_up")]
    pub epochs_up: usize,
    pub lr_init: f64,
    pub lr_up: f64,
}

fn default_epochs_init() -> usize {
    DEFAULT_EPOCHS_INIT
}

fn default_epochs_up() -> usize {
    DEFAULT_EPOCHS_UP
}

impl OnlineSchedule {
    pub fn new(d_init: usize, d_up: usize, lr_init: f64, lr_up: f64) -> Self {
        Self {
            d_init,
            d_up,
            epochs_init: DEFAULT_EPOCHS_INIT,
            epochs_up: DEFAULT_EPOCHS_UP,
            lr_init,
            lr_up,
        }
    }

    pub fn epochs(mut self, init: usize, up: usize) -> Self {
        self.epochs_init = init;
        self.epochs_up = up;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_up == 0 || self.d_init < self.d_up {
            return Err(EpfError::InvalidArgument(format!(
                "need d_init >= d_up >= 1, got d_init = {}, d_up = {}",
                self.d_init, self.d_up
            )));
        }
        if self.epochs_up == 0 || self.epochs_init < self.epochs_up {
            return Err(EpfError::InvalidArgument(format!(
                "need epochs_init >= epochs_up >= 1, got {} and {}",
                self.epochs_init, self.epochs_up
            )));
        }
        TrainConfig::new(self.epochs_init, self.lr_init).validate()?;
        TrainConfig::new(self.epochs_up, self.lr_up).validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestResult {
    pub architecture: String,
    pub dates: Vec<NaiveDate>,
    pub forecasts: Vec<DayHours>,
    pub realized: Vec<DayHours>,
    pub naive: Vec<DayHours>,
    /// Training plus forecasting time of each iteration in seconds.
    pub iteration_secs: Vec<f64>,
    pub total_secs: f64,
    pub metrics: MetricReport,
    pub final_params: ParamSet,
    pub scaler: Scaler,
}

/// Snapshot handed to an observer after each iteration.
#[derive(Debug)]
pub struct IterationInfo<'a> {
    pub iteration: usize,
    pub forecast_date: NaiveDate,
    pub train_dates: &'a [NaiveDate],
    pub params_in: &'a ParamSet,
    pub params_out: &'a ParamSet,
    pub final_loss: f64,
}

pub type Observer<'o> = &'o mut dyn FnMut(&IterationInfo<'_>);

#[derive(Debug, Clone, Default)]
pub struct BacktestOptions {
    /// Parameters to start from instead of the architecture's initializer.
    pub warm_start: Option<ParamSet>,
    pub loss: LossKind,
}

/// Index range of the forecast days inside `designs`.
fn forecast_range(designs: &[DayDesign], start: NaiveDate, end: NaiveDate) -> Result<(usize, usize)> {
    if end < start {
        return Err(EpfError::InvalidArgument(format!("forecast end {end} precedes start {start}")));
    }
    let first = designs
        .first()
        .ok_or_else(|| EpfError::InvalidArgument("no designs to backtest".into()))?
        .date;
    for (i, d) in designs.iter().enumerate() {
        if d.date != first + chrono::Duration::days(i as i64) {
            return Err(EpfError::Data(format!("designs are not consecutive at {}", d.date)));
        }
        if !d.valid {
            return Err(EpfError::Data(format!("design for {} is incomplete", d.date)));
        }
    }
    let idx = |date: NaiveDate| -> Result<usize> {
        let off = (date - first).num_days();
        if off < 0 || off as usize >= designs.len() {
            Err(EpfError::InvalidArgument(format!("{date} outside the design range")))
        } else {
            Ok(off as usize)
        }
    };
    Ok((idx(start)?, idx(end)?))
}

fn insufficient(need: usize, have: usize, start: NaiveDate) -> EpfError {
    EpfError::InvalidArgument(format!(
        "{need} days of history needed before {start}, only {have} available"
    ))
}

/// Partial online learning backtest over `[start, end]`.
pub fn run_backtest(
    spec: &ModelSpec,
    schedule: &OnlineSchedule,
    layout: &FeatureLayout,
    designs: &[DayDesign],
    start: NaiveDate,
    end: NaiveDate,
) -> Result<BacktestResult> {
    run_backtest_with(spec, schedule, layout, designs, start, end, &BacktestOptions::default(), None)
}

#[allow(clippy::too_many_arguments)]
pub fn run_backtest_with(
    spec: &ModelSpec,
    schedule: &OnlineSchedule,
    layout: &FeatureLayout,
    designs: &[DayDesign],
    start: NaiveDate,
    end: NaiveDate,
    options: &BacktestOptions,
    mut observer: Option<Observer<'_>>,
) -> Result<BacktestResult> {
    schedule.validate()?;
    let clock = Instant::now();
    let (i0, i1) = forecast_range(designs, start, end)?;
    if i0 < schedule.d_init {
        return Err(insufficient(schedule.d_init, i0, start));
    }
    let base = i0 - schedule.d_init;
    let scaler = fit_scaler(&designs[base..i0], layout)?;
    let z = scaler.transform_all(&designs[base..=i1], layout)?;
    let dates: Vec<NaiveDate> = designs[base..=i1].iter().map(|d| d.date).collect();
    let model = Model::new(spec.clone(), layout)?;
    let d_init = schedule.d_init;
    let mut params = match &options.warm_start {
        Some(p) if p.shape != *model.shape() => {
            return Err(EpfError::dim(model.shape().len(), p.values.len(), "warm-start parameters"))
        }
        Some(p) => p.clone(),
        None => model.init_params(&z[..d_init])?,
    };

    let n = i1 - i0 + 1;
    let mut forecasts = Vec::with_capacity(n);
    let mut iteration_secs = Vec::with_capacity(n);
    for k in 0..n {
        let t = Instant::now();
        let target = d_init + k;
        let (window, cfg) = if k == 0 {
            (0..d_init, TrainConfig::new(schedule.epochs_init, schedule.lr_init))
        } else {
            (target - schedule.d_up..target, TrainConfig::new(schedule.epochs_up, schedule.lr_up))
        };
        let cfg = cfg.with_loss(options.loss);
        let params_in = observer.as_ref().map(|_| params.clone());
        let mut state = AdamState::for_params(&params);
        let outcome = train_window(&model, &mut params, &mut state, &z[window.clone()], &cfg)
            .map_err(|e| annotate(e, dates[target]))?;
        forecasts.push(model.forward(&params, &z[target])?);
        iteration_secs.push(t.elapsed().as_secs_f64());
        if let (Some(obs), Some(params_in)) = (observer.as_mut(), params_in.as_ref()) {
            obs(&IterationInfo {
                iteration: k + 1,
                forecast_date: dates[target],
                train_dates: &dates[window],
                params_in,
                params_out: &params,
                final_loss: outcome.final_loss,
            });
        }
    }
    finish(spec, designs, i0, i1, forecasts, iteration_secs, clock, params, scaler)
}

fn annotate(e: EpfError, date: NaiveDate) -> EpfError {
    match e {
        EpfError::Numerical(msg) => EpfError::Numerical(format!("forecasting {date}: {msg}")),
        other => other,
    }
}

#[allow(clippy::too_many_arguments)]
fn finish(
    spec: &ModelSpec,
    designs: &[DayDesign],
    i0: usize,
    i1: usize,
    forecasts: Vec<DayHours>,
    iteration_secs: Vec<f64>,
    clock: Instant,
    final_params: ParamSet,
    scaler: Scaler,
) -> Result<BacktestResult> {
    let days = &designs[i0..=i1];
    let realized: Vec<DayHours> = days.iter().map(|d| d.targets).collect();
    let naive: Vec<DayHours> = days.iter().map(naive_from_design).collect();
    if forecasts.iter().flatten().any(|v| !v.is_finite()) {
        return Err(EpfError::Numerical("non-finite forecast".into()));
    }
    let metrics = metrics(&forecasts, &realized, &naive)?;
    Ok(BacktestResult {
        architecture: spec.architecture.clone(),
        dates: days.iter().map(|d| d.date).collect(),
        forecasts,
        realized,
        naive,
        iteration_secs,
        total_secs: clock.elapsed().as_secs_f64(),
        metrics,
        final_params,
        scaler,
    })
}

/// Classic rolling-window baseline: every day the scaler and the model are
/// fitted from scratch on the last `window` days with `epochs` epochs.
#[allow(clippy::too_many_arguments)]
pub fn run_full_refit_baseline(
    spec: &ModelSpec,
    window: usize,
    epochs: usize,
    learning_rate: f64,
    layout: &FeatureLayout,
    designs: &[DayDesign],
    start: NaiveDate,
    end: NaiveDate,
) -> Result<BacktestResult> {
    let cfg = TrainConfig::new(epochs, learning_rate);
    cfg.validate()?;
    if window == 0 {
        return Err(EpfError::InvalidArgument("refit window must be at least 1 day".into()));
    }
    let clock = Instant::now();
    let (i0, i1) = forecast_range(designs, start, end)?;
    if i0 < window {
        return Err(insufficient(window, i0, start));
    }
    let model = Model::new(spec.clone(), layout)?;
    let mut forecasts = Vec::with_capacity(i1 - i0 + 1);
    let mut iteration_secs = Vec::with_capacity(i1 - i0 + 1);
    let mut last = None;
    for target in i0..=i1 {
        let t = Instant::now();
        let scaler = fit_scaler(&designs[target - window..target], layout)?;
        let z = scaler.transform_all(&designs[target - window..=target], layout)?;
        let mut params = model.init_params(&z[..window])?;
        let mut state = AdamState::for_params(&params);
        train_window(&model, &mut params, &mut state, &z[..window], &cfg)
            .map_err(|e| annotate(e, designs[target].date))?;
        forecasts.push(model.forward(&params, &z[window])?);
        iteration_secs.push(t.elapsed().as_secs_f64());
        last = Some((params, scaler));
    }
    let (params, scaler) = last.expect("at least one forecast day");
    finish(spec, designs, i0, i1, forecasts, iteration_secs, clock, params, scaler)
}
