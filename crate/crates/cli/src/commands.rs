use std::collections::BTreeMap;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::{Duration, NaiveDate};
use epf_core::ensemble::{forward_select, write_weights_csv, Boa, Combiner};
use epf_core::evaluation::{dm_matrix, metrics, pareto_front, MetricReport};
use epf_core::features::{build_designs, DayDesign, FeatureLayout};
use epf_core::marketdata::{clean, generate_synthetic, load_csv, CleaningLog, DayHours, MarketSeries, ZoneConfig, HOURS};
use epf_core::model::{read_params, write_params, ModelSpec};
use epf_core::online::{run_backtest_with, BacktestOptions, OnlineSchedule};
use epf_core::seed::derive_seed;
use epf_core::tuner::{run_study, Assignment, BacktestEvaluator, SearchSpace, TrialTemplate};
use epf_core::EpfError;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::artifacts::{
    content_hash, forecasts_csv_bytes, read_forecasts_csv, read_json, read_study_csv, require, write_file,
    write_forecasts_csv, write_json, write_study_csv, DatasetInfo, Paths, StudyRow,
};
use crate::config::ModelConfig;
use crate::{CliError, CliResult, Context};

pub const NAIVE_NAME: &str = "Naive";
pub const BOA_ALL_NAME: &str = "BOA all";

fn paths(ctx: &Context) -> Paths {
    Paths::new(&ctx.out)
}

fn model_seed(ctx: &Context, name: &str) -> u64 {
    derive_seed(ctx.seed, &format!("model/{name}"), 0)
}

fn study_seed(ctx: &Context, name: &str) -> u64 {
    derive_seed(ctx.seed, &format!("tune/{name}"), 0)
}

fn write_dataset(ctx: &Context, series: &MarketSeries, log: &CleaningLog) -> CliResult<()> {
    let p = paths(ctx);
    std::fs::create_dir_all(p.data_dir())?;
    series.save_csv(&p.cleaned_csv())?;
    let info = DatasetInfo {
        zone_id: series.zone_id.clone(),
        has_wind_offshore: series.has_wind_offshore(),
        first_day: series.days[0],
        last_day: *series.days.last().expect("non-empty series"),
        n_days: series.n_days(),
    };
    write_json(&p.dataset_json(), &info)?;
    write_json(&p.data_dir().join("cleaning_log.json"), log)?;
    let layout = FeatureLayout::new(info.has_wind_offshore);
    write_file(&p.data_dir().join("feature_map.txt"), layout.feature_map().as_bytes())?;
    Ok(())
}

/// Generates the configured synthetic market into `<out>/data`.
pub fn cmd_synth(ctx: &Context) -> CliResult<CleaningLog> {
    let syn = ctx
        .config
        .data
        .synthetic
        .as_ref()
        .ok_or_else(|| CliError::usage("config has no [data.synthetic] table; use `epf ingest`"))?;
    let market = generate_synthetic(syn.n_days, derive_seed(ctx.seed, "synthetic", 0), &syn.spec)?;
    let log = CleaningLog::default();
    write_dataset(ctx, &market.series, &log)?;
    write_json(&paths(ctx).data_dir().join("generating_coefficients.json"), &market.coefficients)?;
    log::info!("synthesized {} days", market.series.n_days());
    Ok(log)
}

/// Reads, validates and cleans the configured raw CSV into `<out>/data`.
pub fn cmd_ingest(ctx: &Context) -> CliResult<CleaningLog> {
    let data = &ctx.config.data;
    let (Some(csv), Some(zone)) = (&data.csv, &data.zone_config) else {
        return Err(CliError::usage("config has no data.csv/data.zone_config; use `epf synth`"));
    };
    require(csv, "ingest")?;
    require(zone, "ingest")?;
    let zone = ZoneConfig::load(zone)?;
    let raw = load_csv(csv, &zone)?;
    let (series, log) = clean(raw, &zone)?;
    for w in &log.warnings {
        log::warn!("{w}");
    }
    write_dataset(ctx, &series, &log)?;
    log::info!("ingested {} days, {} cells imputed", series.n_days(), log.total_fills());
    Ok(log)
}

/// Cleaned series plus feature layout.
struct Dataset {
    series: MarketSeries,
    layout: FeatureLayout,
}

fn load_dataset(ctx: &Context) -> CliResult<Dataset> {
    let p = paths(ctx);
    require(&p.dataset_json(), "ingest` or `epf synth")?;
    require(&p.cleaned_csv(), "ingest` or `epf synth")?;
    let info: DatasetInfo = read_json(&p.dataset_json())?;
    let series = MarketSeries::load_canonical_csv(&p.cleaned_csv(), &info.zone_id, info.has_wind_offshore)?;
    Ok(Dataset {
        layout: FeatureLayout::new(info.has_wind_offshore),
        series,
    })
}

impl Dataset {
    /// Designs built only from data up to and including `horizon`.
    fn designs_until(&self, horizon: NaiveDate) -> CliResult<Vec<DayDesign>> {
        let first = self.series.days[0];
        let last = *self.series.days.last().expect("non-empty series");
        if horizon > last || horizon < first {
            return Err(EpfError::Data(format!("period end {horizon} outside the data range {first}..{last}")).into());
        }
        let s = self.series.slice_dates(first, horizon)?;
        Ok(build_designs(&s, &self.layout)?)
    }

    fn test_end(&self, ctx: &Context) -> NaiveDate {
        ctx.config
            .periods
            .test_end
            .unwrap_or(*self.series.days.last().expect("non-empty series"))
    }
}

fn validation_end(ctx: &Context) -> NaiveDate {
    ctx.config.periods.test_start - Duration::days(1)
}

fn history_before(designs: &[DayDesign], date: NaiveDate) -> usize {
    designs.iter().take_while(|d| d.date < date).count()
}

fn template(ctx: &Context, m: &ModelConfig) -> TrialTemplate {
    TrialTemplate {
        spec: m.spec(model_seed(ctx, m.name())),
        schedule: m.schedule(&ctx.config.schedule),
    }
}

fn realized(designs: &[DayDesign], start: NaiveDate, end: NaiveDate) -> (Vec<NaiveDate>, Vec<DayHours>) {
    designs
        .iter()
        .filter(|d| d.date >= start && d.date <= end)
        .map(|d| (d.date, d.targets))
        .unzip()
}

fn check_dates(path: &Path, got: &[NaiveDate], want: &[NaiveDate]) -> CliResult<()> {
    if got != want {
        return Err(EpfError::Data(format!(
            "{} covers {} days that do not match the expected {} days of the period",
            path.display(),
            got.len(),
            want.len()
        ))
        .into());
    }
    Ok(())
}

/// Hyperparameter study per configured model over the validation period.
pub fn cmd_tune(ctx: &Context) -> CliResult<()> {
    let ds = load_dataset(ctx)?;
    let (start, end) = (ctx.config.periods.validation_start, validation_end(ctx));
    let designs = ds.designs_until(end)?;
    let models = configured_models(ctx)?;
    let study_cfg = ctx.config.tuner.study(ctx.jobs);
    for m in models {
        let mut space = SearchSpace::for_architecture(&m.architecture, history_before(&designs, start))?;
        for (name, [lo, hi]) in &ctx.config.tuner.bounds {
            if space.get(name).is_some() {
                space.set_bounds(name, *lo, *hi)?;
            }
        }
        let evaluator = BacktestEvaluator {
            template: template(ctx, m),
            layout: &ds.layout,
            designs: &designs,
            start,
            end,
        };
        let seed = study_seed(ctx, m.name());
        log::info!("tuning {} with {} trials", m.name(), study_cfg.n_trials);
        let records = run_study(&space, &study_cfg, &evaluator, seed)?;
        let dir = paths(ctx).tune_dir(m.name());
        let (dates, _) = realized(&designs, start, end);
        let mut rows = Vec::with_capacity(records.len());
        for r in &records {
            let forecasts = if r.failed {
                String::new()
            } else {
                let bytes = forecasts_csv_bytes(&dates, &r.forecasts)?;
                let hash = content_hash(&bytes);
                write_file(&dir.join("trials").join(format!("{hash}.csv")), &bytes)?;
                hash
            };
            let params = space
                .params
                .iter()
                .map(|p| (p.name.clone(), r.params.get(&p.name).copied().unwrap_or(f64::NAN)))
                .collect();
            rows.push(StudyRow {
                trial: r.id,
                seed: derive_seed(seed, "trial", r.id as u64),
                params,
                mae: r.mae,
                runtime_secs: r.runtime_secs,
                failed: r.failed,
                forecasts,
            });
        }
        write_study_csv(&dir.join("study.csv"), &rows)?;
        if rows.iter().all(|r| r.failed) {
            return Err(EpfError::Numerical(format!("every trial of {} failed", m.name())).into());
        }
    }
    Ok(())
}

fn configured_models(ctx: &Context) -> CliResult<&[ModelConfig]> {
    if ctx.config.models.is_empty() {
        return Err(CliError::usage("config lists no [[models]]"));
    }
    Ok(&ctx.config.models)
}

fn read_study(ctx: &Context, name: &str) -> CliResult<Vec<StudyRow>> {
    let path = paths(ctx).tune_dir(name).join("study.csv");
    require(&path, "tune")?;
    Ok(read_study_csv(&path)?)
}

fn assignment(row: &StudyRow) -> Assignment {
    row.params.iter().filter(|(_, v)| v.is_finite()).map(|(k, v)| (k.clone(), *v)).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct BacktestSummary {
    name: String,
    spec: ModelSpec,
    schedule: OnlineSchedule,
    start: NaiveDate,
    end: NaiveDate,
    n_days: usize,
    trial: Option<usize>,
    metrics: MetricReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Timing {
    total_secs: f64,
    mean_iteration_secs: f64,
}

/// Test-period backtest of every configured model.
pub fn cmd_backtest(ctx: &Context) -> CliResult<()> {
    let ds = load_dataset(ctx)?;
    let (start, end) = (ctx.config.periods.test_start, ds.test_end(ctx));
    let designs = ds.designs_until(end)?;
    for m in configured_models(ctx)? {
        let tpl = template(ctx, m);
        let (spec, schedule, trial) = if m.use_study {
            let rows = read_study(ctx, m.name())?;
            let best = rows
                .iter()
                .find(|r| !r.failed)
                .ok_or_else(|| EpfError::Numerical(format!("study of {} has no successful trial", m.name())))?;
            let (spec, sched) = tpl.apply(&assignment(best), best.seed);
            (spec, sched, Some(best.trial))
        } else {
            (tpl.spec, tpl.schedule, None)
        };
        let warm_start = match &m.warm_start {
            Some(path) => {
                require(path, "backtest")?;
                let (_, p) = read_params(BufReader::new(std::fs::File::open(path)?))?;
                Some(p)
            }
            None => None,
        };
        let options = BacktestOptions {
            warm_start,
            ..Default::default()
        };
        log::info!("backtesting {} from {start} to {end}", m.name());
        let res = run_backtest_with(&spec, &schedule, &ds.layout, &designs, start, end, &options, None)?;
        let dir = paths(ctx).backtest_dir(m.name());
        write_forecasts_csv(&dir.join("forecasts.csv"), &res.dates, &res.forecasts)?;
        let summary = BacktestSummary {
            name: m.name().to_string(),
            spec: spec.clone(),
            schedule,
            start,
            end,
            n_days: res.dates.len(),
            trial,
            metrics: res.metrics.clone(),
        };
        write_json(&dir.join("summary.json"), &summary)?;
        write_json(
            &dir.join("timing.json"),
            &Timing {
                total_secs: res.total_secs,
                mean_iteration_secs: res.iteration_secs.iter().sum::<f64>() / res.iteration_secs.len() as f64,
            },
        )?;
        let mut buf = Vec::new();
        write_params(&mut buf, &spec.architecture, &res.final_params)?;
        write_file(&dir.join("params.txt"), &buf)?;
    }
    Ok(())
}

/// One candidate of the ensemble pools.
#[derive(Debug, Clone)]
struct Candidate {
    model: String,
    row: StudyRow,
    validation: Vec<DayHours>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Member {
    model: String,
    trial: usize,
    seed: u64,
    validation_mae: f64,
    params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MembersFile {
    display_name: String,
    pool_size: usize,
    whole_pool: bool,
    validation_mae_path: Vec<f64>,
    members: Vec<Member>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct EnsembleSummary {
    display_name: String,
    start: NaiveDate,
    end: NaiveDate,
    n_days: usize,
    metrics: MetricReport,
}

fn load_candidates(ctx: &Context, m: &ModelConfig, val_dates: &[NaiveDate]) -> CliResult<Vec<Candidate>> {
    let dir = paths(ctx).tune_dir(m.name());
    read_study(ctx, m.name())?
        .into_iter()
        .filter(|r| !r.failed)
        .map(|row| {
            let path = dir.join("trials").join(format!("{}.csv", row.forecasts));
            require(&path, "tune")?;
            let (dates, validation) = read_forecasts_csv(&path)?;
            check_dates(&path, &dates, val_dates)?;
            Ok(Candidate {
                model: m.name().to_string(),
                row,
                validation,
            })
        })
        .collect()
}

/// Model name and trial id of an ensemble member.
type RerunKey = (String, usize);
/// Test-period forecasts and wall time of a member rerun.
type Rerun = (Vec<DayHours>, f64);

/// Per-class `X (BOA)` ensembles and the cross-class `BOA all` ensemble.
pub fn cmd_select(ctx: &Context) -> CliResult<()> {
    let ds = load_dataset(ctx)?;
    let (val_start, val_end) = (ctx.config.periods.validation_start, validation_end(ctx));
    let (test_start, test_end) = (ctx.config.periods.test_start, ds.test_end(ctx));
    let designs = ds.designs_until(test_end)?;
    let (val_dates, val_realized) = realized(&designs, val_start, val_end);
    let (test_dates, test_realized) = realized(&designs, test_start, test_end);
    let tuner = &ctx.config.tuner;

    let mut pools: Vec<(String, Vec<Candidate>)> = Vec::new();
    for m in configured_models(ctx)? {
        pools.push((m.name().to_string(), load_candidates(ctx, m, &val_dates)?));
    }
    let mut all: Vec<Candidate> = pools.iter().flat_map(|(_, c)| c.iter().cloned()).collect();
    all.sort_by(|a, b| a.row.mae.total_cmp(&b.row.mae).then(a.model.cmp(&b.model)).then(a.row.trial.cmp(&b.row.trial)));
    all.truncate(tuner.boa_all_pool);

    let mut ensembles: Vec<(String, String, Vec<Candidate>)> = pools
        .into_iter()
        .map(|(name, c)| (format!("{name}_BOA"), format!("{name} (BOA)"), c))
        .collect();
    ensembles.push(("BOA_all".to_string(), BOA_ALL_NAME.to_string(), all));

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(ctx.jobs)
        .build()
        .map_err(|e| CliError::usage(format!("thread pool: {e}")))?;
    let mut reruns: BTreeMap<RerunKey, Rerun> = BTreeMap::new();
    for (dir_name, display, candidates) in ensembles {
        if candidates.is_empty() {
            return Err(EpfError::Numerical(format!("{display}: no successful trials to select from")).into());
        }
        let refs: Vec<&[DayHours]> = candidates.iter().map(|c| c.validation.as_slice()).collect();
        let sel = forward_select(&refs, &val_realized, tuner.ensemble_size, &Boa)?;
        let chosen: Vec<&Candidate> = sel.members.iter().map(|&i| &candidates[i]).collect();

        let todo: Vec<&Candidate> = chosen
            .iter()
            .copied()
            .filter(|c| !reruns.contains_key(&(c.model.clone(), c.row.trial)))
            .collect();
        let done: Vec<CliResult<(RerunKey, Rerun)>> = pool.install(|| {
            todo.par_iter()
                .map(|c| {
                    let m = ctx.config.model(&c.model)?;
                    let (spec, sched) = template(ctx, m).apply(&assignment(&c.row), c.row.seed);
                    let res = run_backtest_with(
                        &spec,
                        &sched,
                        &ds.layout,
                        &designs,
                        test_start,
                        test_end,
                        &BacktestOptions::default(),
                        None,
                    )?;
                    Ok(((c.model.clone(), c.row.trial), (res.forecasts, res.total_secs)))
                })
                .collect()
        });
        for r in done {
            let (k, v) = r?;
            reruns.insert(k, v);
        }

        let clock = Instant::now();
        let test_experts: Vec<&[DayHours]> = chosen
            .iter()
            .map(|c| reruns[&(c.model.clone(), c.row.trial)].0.as_slice())
            .collect();
        let combo = Boa.combine(&test_experts, &test_realized)?;
        let combine_secs = clock.elapsed().as_secs_f64();
        let naive: Vec<DayHours> = designs
            .iter()
            .filter(|d| d.date >= test_start && d.date <= test_end)
            .map(epf_core::evaluation::naive_from_design)
            .collect();
        let report = metrics(&combo.forecasts, &test_realized, &naive)?;

        let dir = paths(ctx).select_dir(&dir_name);
        let members = MembersFile {
            display_name: display.clone(),
            pool_size: candidates.len(),
            whole_pool: sel.whole_pool,
            validation_mae_path: sel.mae_path.clone(),
            members: chosen
                .iter()
                .map(|c| Member {
                    model: c.model.clone(),
                    trial: c.row.trial,
                    seed: c.row.seed,
                    validation_mae: c.row.mae,
                    params: c.row.params.clone(),
                })
                .collect(),
        };
        write_json(&dir.join("members.json"), &members)?;
        write_forecasts_csv(&dir.join("forecasts.csv"), &test_dates, &combo.forecasts)?;
        let expert_names: Vec<String> = chosen.iter().map(|c| format!("{}#{}", c.model, c.row.trial)).collect();
        let mut buf = Vec::new();
        write_weights_csv(&mut buf, &test_dates, &expert_names, &combo)?;
        write_file(&dir.join("weights.csv"), &buf)?;
        write_json(
            &dir.join("summary.json"),
            &EnsembleSummary {
                display_name: display,
                start: test_start,
                end: test_end,
                n_days: test_dates.len(),
                metrics: report,
            },
        )?;
        let member_secs: f64 = chosen.iter().map(|c| reruns[&(c.model.clone(), c.row.trial)].1).sum();
        write_json(
            &dir.join("timing.json"),
            &Timing {
                total_secs: member_secs + combine_secs,
                mean_iteration_secs: (member_secs + combine_secs) / test_dates.len() as f64,
            },
        )?;
    }
    Ok(())
}

/// A forecast source found on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub model: String,
    /// Directory holding `forecasts.csv` and `timing.json`, relative to the
    /// output directory; empty for the naive benchmark.
    pub source: PathBuf,
    pub metrics: MetricReport,
}

fn sources(ctx: &Context) -> CliResult<Vec<(String, PathBuf)>> {
    let p = paths(ctx);
    let mut out = Vec::new();
    for m in &ctx.config.models {
        let dir = p.backtest_dir(m.name());
        if dir.join("forecasts.csv").exists() {
            out.push((m.name().to_string(), dir));
        }
    }
    let select = p.out.join("select");
    if select.is_dir() {
        let mut dirs: Vec<PathBuf> = std::fs::read_dir(&select)?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<_>>()?;
        dirs.sort();
        for dir in dirs {
            let members = dir.join("members.json");
            if members.exists() && dir.join("forecasts.csv").exists() {
                let m: MembersFile = read_json(&members)?;
                out.push((m.display_name, dir));
            }
        }
    }
    if out.is_empty() {
        return Err(CliError::missing(&p.backtest_dir("<model>").join("forecasts.csv"), "backtest"));
    }
    Ok(out)
}

/// Test-period metrics of every backtest and ensemble, plus the naive row.
pub fn cmd_evaluate(ctx: &Context) -> CliResult<Vec<MetricRow>> {
    let ds = load_dataset(ctx)?;
    let (start, end) = (ctx.config.periods.test_start, ds.test_end(ctx));
    let designs = ds.designs_until(end)?;
    let (dates, real) = realized(&designs, start, end);
    let naive: Vec<DayHours> = designs
        .iter()
        .filter(|d| d.date >= start && d.date <= end)
        .map(epf_core::evaluation::naive_from_design)
        .collect();
    let mut rows = vec![MetricRow {
        model: NAIVE_NAME.to_string(),
        source: PathBuf::new(),
        metrics: metrics(&naive, &real, &naive)?,
    }];
    for (name, dir) in sources(ctx)? {
        let path = dir.join("forecasts.csv");
        let (got, f) = read_forecasts_csv(&path)?;
        check_dates(&path, &got, &dates)?;
        rows.push(MetricRow {
            model: name,
            source: dir.strip_prefix(&ctx.out).map(Path::to_path_buf).unwrap_or_else(|_| dir.clone()),
            metrics: metrics(&f, &real, &naive)?,
        });
    }
    let p = paths(ctx);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["model", "rmse", "mae", "rmae", "n_days"]).map_err(EpfError::from)?;
    for r in &rows {
        let m = &r.metrics;
        w.write_record([r.model.clone(), m.rmse.to_string(), m.mae.to_string(), m.rmae.to_string(), m.n_days.to_string()])
            .map_err(EpfError::from)?;
    }
    write_file(&p.evaluate_dir().join("metrics.csv"), &csv_bytes(w)?)?;
    write_json(&p.evaluate_dir().join("metrics.json"), &rows)?;
    Ok(rows)
}

fn csv_bytes(w: csv::Writer<Vec<u8>>) -> CliResult<Vec<u8>> {
    w.into_inner().map_err(|e| EpfError::Io(e.into_error()).into())
}

/// Plot-ready comparison tables from the evaluated models.
pub fn cmd_report(ctx: &Context) -> CliResult<()> {
    let p = paths(ctx);
    let metrics_path = p.evaluate_dir().join("metrics.json");
    require(&metrics_path, "evaluate")?;
    let rows: Vec<MetricRow> = read_json(&metrics_path)?;
    let ds = load_dataset(ctx)?;
    let (start, end) = (ctx.config.periods.test_start, ds.test_end(ctx));
    let designs = ds.designs_until(end)?;
    let (dates, real) = realized(&designs, start, end);

    let mut forecasts: Vec<Vec<DayHours>> = Vec::with_capacity(rows.len());
    for r in &rows {
        if r.source.as_os_str().is_empty() {
            forecasts.push(
                designs
                    .iter()
                    .filter(|d| d.date >= start && d.date <= end)
                    .map(epf_core::evaluation::naive_from_design)
                    .collect(),
            );
        } else {
            let path = ctx.out.join(&r.source).join("forecasts.csv");
            require(&path, "backtest")?;
            let (got, f) = read_forecasts_csv(&path)?;
            check_dates(&path, &got, &dates)?;
            forecasts.push(f);
        }
    }
    let names: Vec<String> = rows.iter().map(|r| r.model.clone()).collect();
    let dir = p.report_dir();

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["model", "rmse", "mae", "rmae"]).map_err(EpfError::from)?;
    for r in &rows {
        let m = &r.metrics;
        w.write_record([r.model.clone(), m.rmse.to_string(), m.mae.to_string(), m.rmae.to_string()])
            .map_err(EpfError::from)?;
    }
    write_file(&dir.join("metrics_table.csv"), &csv_bytes(w)?)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(std::iter::once("hour".to_string()).chain(names.iter().cloned()))
        .map_err(EpfError::from)?;
    for h in 0..HOURS {
        w.write_record(std::iter::once(h.to_string()).chain(rows.iter().map(|r| r.metrics.hourly_rmse[h].to_string())))
            .map_err(EpfError::from)?;
    }
    write_file(&dir.join("hourly_rmse.csv"), &csv_bytes(w)?)?;

    let refs: Vec<&[DayHours]> = forecasts.iter().map(Vec::as_slice).collect();
    let dm = dm_matrix(&refs, &real)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(std::iter::once("model".to_string()).chain(names.iter().cloned()))
        .map_err(EpfError::from)?;
    for (name, row) in names.iter().zip(&dm) {
        w.write_record(std::iter::once(name.clone()).chain(row.iter().map(|v| v.to_string())))
            .map_err(EpfError::from)?;
    }
    write_file(&dir.join("dm_pvalues.csv"), &csv_bytes(w)?)?;

    let mut timed = Vec::new();
    for r in rows.iter().filter(|r| !r.source.as_os_str().is_empty()) {
        let path = ctx.out.join(&r.source).join("timing.json");
        require(&path, "backtest")?;
        let t: Timing = read_json(&path)?;
        timed.push((r.model.clone(), t.total_secs, r.metrics.mae));
    }
    let front = pareto_front(&timed.iter().map(|(_, t, m)| (*t, *m)).collect::<Vec<_>>());
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["model", "runtime_secs", "mae", "pareto"]).map_err(EpfError::from)?;
    for ((name, t, m), on) in timed.iter().zip(front) {
        w.write_record([name.clone(), t.to_string(), m.to_string(), on.to_string()])
            .map_err(EpfError::from)?;
    }
    write_file(&dir.join("pareto.csv"), &csv_bytes(w)?)?;
    Ok(())
}
