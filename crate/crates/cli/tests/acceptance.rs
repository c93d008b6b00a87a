//! Acceptance run: one `[PASS]`/`[FAIL]` line per criterion.
//!
//! Exits nonzero when a criterion fails, except for failures listed in
//! `KNOWN_FAILURES`, which are still reported as `[FAIL]`.

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::Duration;
use epf_cli::{cmd_backtest, cmd_evaluate, cmd_report, cmd_synth, Context};
use epf_core::ensemble::BoaState;
use epf_core::evaluation::{dm_from_differential, dm_test, naive_from_design, rmae};
use epf_core::features::{build_designs, fit_scaler, DayDesign, FeatureLayout};
use epf_core::marketdata::{generate_synthetic, DayHours, SyntheticSpec, HOURS};
use epf_core::model::{init_random, Model, ModelSpec};
use epf_core::online::{run_backtest, run_full_refit_baseline, OnlineSchedule};
use epf_core::seed::rng_from_seed;
use epf_core::training::{gradient, loss_with, train_window, AdamState, LossKind, TrainConfig};
use epf_core::tuner::{run_study, Assignment, ParamDef, ParamKind, SearchSpace, StudyConfig, TrialOutput};
use rand::Rng;

/// Criteria expected to fail, with the reason.
const KNOWN_FAILURES: &[(u32, &str)] = &[(
    1,
    "a full design without offshore wind has 6 x 24 + 4 + 3 = 151 columns; 171 removes only 4",
)];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within_time(o: Outcome, secs: f64, limit: f64) -> Outcome {
    if secs < limit {
        o
    } else {
        outcome(false, format!("{}; runtime {secs:.1} s exceeds {limit} s", o.detail))
    }
}

fn synth_designs(n_days: usize, seed: u64, spec: &SyntheticSpec) -> (FeatureLayout, Vec<DayDesign>) {
    let m = generate_synthetic(n_days, seed, spec).unwrap();
    let layout = FeatureLayout::new(spec.has_wind_offshore);
    let designs = build_designs(&m.series, &layout).unwrap();
    (layout, designs)
}

fn c1_widths() -> Outcome {
    let t = Instant::now();
    let mut notes = Vec::new();
    let mut pass = true;
    for (offshore, full, reduced, last) in [(true, 175, 15, 14), (false, 171, 14, 13)] {
        let l = FeatureLayout::new(offshore);
        let widths = l.reduced_widths();
        let ok_reduced = widths[..HOURS - 1].iter().all(|w| *w == reduced) && widths[HOURS - 1] == last;
        let ok = l.full_width() == full && ok_reduced;
        pass &= ok;
        notes.push(format!(
            "offshore={offshore}: full {} (want {full}), reduced {}/{} (want {reduced}/{last})",
            l.full_width(),
            widths[0],
            widths[HOURS - 1]
        ));
    }
    within_time(outcome(pass, notes.join("; ")), t.elapsed().as_secs_f64(), 1.0)
}

fn c2_gradient() -> Outcome {
    let t = Instant::now();
    let spec = SyntheticSpec::default();
    let (layout, designs) = synth_designs(40, 2, &spec);
    let window = &designs[..12];
    let scaler = fit_scaler(window, &layout).unwrap();
    let mut z = scaler.transform_all(window, &layout).unwrap();
    for d in &mut z {
        d.targets.iter_mut().for_each(|y| *y /= 50.0);
    }
    let mut rng = rng_from_seed(2024);
    let mut worst: f64 = 0.0;
    let mut points = 0;
    let mut rejected = 0;
    let step = 1e-6;
    while points < 100 {
        let spec = ModelSpec::new("MLPReducedLinear")
            .hidden(16)
            .penalties(1e-3, 0.0)
            .seed(rng.gen());
        let m = Model::new(spec, &layout).unwrap();
        let mut p = init_random(&m);
        for v in &mut p.values {
            *v += rng.gen_range(-0.2..0.2);
        }
        // stay clear of the leaky-ReLU kink for every day and unit
        let alpha = m.spec.leak_alpha;
        let near_kink = z.iter().any(|d| {
            m.hidden_activations(&p, &d.full_x)
                .iter()
                .any(|a| (if *a > 0.0 { *a } else { a / alpha }).abs() < 1e-3)
        });
        if near_kink {
            rejected += 1;
            continue;
        }
        let g = gradient(&m, &p, &z, LossKind::Squared).unwrap();
        for _ in 0..200 {
            let i = rng.gen_range(0..p.values.len());
            let mut plus = p.clone();
            plus.values[i] += step;
            let mut minus = p.clone();
            minus.values[i] -= step;
            let fd = (loss_with(&m, &plus, &z, LossKind::Squared).unwrap()
                - loss_with(&m, &minus, &z, LossKind::Squared).unwrap())
                / (2.0 * step);
            let err = (g.values[i] - fd).abs() / g.values[i].abs().max(fd.abs()).max(1e-3);
            worst = worst.max(err);
        }
        points += 1;
    }
    let o = outcome(
        worst < 1e-5,
        format!("max relative error {worst:.2e} over 100 points x 200 coordinates ({rejected} kink points redrawn)"),
    );
    within_time(o, t.elapsed().as_secs_f64(), 10.0)
}

/// Normal equations with partial-pivot Gaussian elimination.
fn least_squares(rows: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let p = rows[0].len();
    let mut a = vec![vec![0.0; p + 1]; p];
    for (r, yi) in rows.iter().zip(y) {
        for i in 0..p {
            for j in 0..p {
                a[i][j] += r[i] * r[j];
            }
            a[i][p] += r[i] * yi;
        }
    }
    for col in 0..p {
        let piv = (col..p).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        for row in 0..p {
            if row != col {
                let f = a[row][col] / a[col][col];
                for k in col..=p {
                    a[row][k] -= f * a[col][k];
                }
            }
        }
    }
    (0..p).map(|i| a[i][p] / a[i][i]).collect()
}

fn c3_ols() -> Outcome {
    let t = Instant::now();
    let spec = SyntheticSpec::default();
    let (layout, designs) = synth_designs(230, 31, &spec);
    let window = &designs[designs.len() - 200..];
    let scaler = fit_scaler(window, &layout).unwrap();
    let z = scaler.transform_all(window, &layout).unwrap();
    let m = Model::new(ModelSpec::new("ReducedLinear").seed(5), &layout).unwrap();
    let mut p = init_random(&m);
    for (epochs, lr) in [(3000, 1.0), (20000, 0.01), (10000, 0.001)] {
        let mut state = AdamState::for_params(&p);
        let cfg = TrainConfig::new(epochs, lr).with_loss(LossKind::Squared);
        train_window(&m, &mut p, &mut state, &z, &cfg).unwrap();
    }
    let o = p.offsets();
    let mut gap: f64 = 0.0;
    let mut sse = 0.0;
    let mut dropped = 0;
    for h in 0..HOURS {
        // columns constant over the window (night-time solar) are not identified
        let keep: Vec<usize> = (0..z[0].reduced_x[h].len())
            .filter(|&j| z.iter().any(|d| d.reduced_x[h][j] != z[0].reduced_x[h][j]))
            .collect();
        dropped += z[0].reduced_x[h].len() - keep.len();
        let rows: Vec<Vec<f64>> = z
            .iter()
            .map(|d| std::iter::once(1.0).chain(keep.iter().map(|&j| d.reduced_x[h][j])).collect())
            .collect();
        let y: Vec<f64> = z.iter().map(|d| d.targets[h]).collect();
        let beta = least_squares(&rows, &y);
        gap = gap.max((p.values[o.skip_bias.start + h] - beta[0]).abs());
        let w = p.skip_weights(h);
        for (k, &j) in keep.iter().enumerate() {
            gap = gap.max((w[j] - beta[k + 1]).abs());
        }
        for (r, yi) in rows.iter().zip(&y) {
            let fit: f64 = r.iter().zip(&beta).map(|(a, b)| a * b).sum();
            sse += (fit - yi).powi(2);
        }
    }
    let rmse_ols = (sse / (z.len() * HOURS) as f64).sqrt();
    let rmse_adam = loss_with(&m, &p, &z, LossKind::Squared).unwrap().sqrt();
    let ratio = rmse_adam / rmse_ols;
    let pass = gap < 1e-2 && ratio <= 1.001;
    let o = outcome(
        pass,
        format!("max coefficient gap {gap:.2e}, RMSE {rmse_adam:.6} vs OLS {rmse_ols:.6} (ratio {ratio:.6}); {dropped} constant columns excluded"),
    );
    within_time(o, t.elapsed().as_secs_f64(), 30.0)
}

fn c4_boa() -> Outcome {
    let t = Instant::now();
    let mut rng = rng_from_seed(4);
    let k = 6;
    let mut boa = BoaState::new(k);
    let mut worst_sum: f64 = 0.0;
    let mut negative = false;
    for _ in 0..10_000 {
        let experts: Vec<DayHours> = (0..k)
            .map(|_| std::array::from_fn(|_| rng.gen_range(-50.0..150.0)))
            .collect();
        let y: DayHours = std::array::from_fn(|_| rng.gen_range(-50.0..150.0));
        boa.update(&experts, &y).unwrap();
        for h in 0..HOURS {
            let s: f64 = boa.weights.iter().map(|w| w[h]).sum();
            worst_sum = worst_sum.max((s - 1.0).abs());
            negative |= boa.weights.iter().any(|w| w[h] < 0.0);
        }
    }
    let mut dom = BoaState::new(3);
    let mut reached = None;
    for round in 1..=500 {
        let y: DayHours = std::array::from_fn(|h| 40.0 + rng.gen_range(-20.0..20.0) + h as f64);
        let experts = vec![y.map(|v| v + 1.0), y, y.map(|v| v - 1.0)];
        dom.update(&experts, &y).unwrap();
        if reached.is_none() && dom.weights[1].iter().all(|w| *w > 0.99) {
            reached = Some(round);
        }
    }
    let pass = worst_sum <= 1e-12 && !negative && reached.is_some();
    let o = outcome(
        pass,
        format!(
            "max |sum - 1| {worst_sum:.1e} after 10000 updates; dominant weight > 0.99 at round {}; final {:.6}",
            reached.map_or("never".into(), |r| r.to_string()),
            dom.weights[1].iter().copied().fold(f64::INFINITY, f64::min)
        ),
    );
    within_time(o, t.elapsed().as_secs_f64(), 5.0)
}

fn c5_online_vs_refit() -> Outcome {
    let t = Instant::now();
    let (layout, designs) = synth_designs(600, 55, &SyntheticSpec::default());
    let n = designs.len();
    let (start, end) = (designs[n - 200].date, designs[n - 1].date);
    let spec = ModelSpec::new("MLPReducedLinear").hidden(16).seed(55);
    let schedule = OnlineSchedule::new(300, 28, 1.0, 0.01).epochs(60, 10);
    let online = run_backtest(&spec, &schedule, &layout, &designs, start, end).unwrap();
    let refit = run_full_refit_baseline(&spec, 300, 60, 1.0, &layout, &designs, start, end).unwrap();
    let mae_ratio = online.metrics.mae / refit.metrics.mae;
    let speedup = refit.total_secs / online.total_secs;
    let pass = mae_ratio <= 1.05 && speedup >= 3.0;
    let o = outcome(
        pass,
        format!(
            "MAE online {:.3} vs refit {:.3} (ratio {mae_ratio:.3}); wall time {:.2} s vs {:.2} s ({speedup:.1}x)",
            online.metrics.mae, refit.metrics.mae, online.total_secs, refit.total_secs
        ),
    );
    within_time(o, t.elapsed().as_secs_f64(), 300.0)
}

fn test_mae(arch: &str, hidden: usize, nonlinearity: f64, seed: u64) -> f64 {
    let spec = SyntheticSpec {
        nonlinearity,
        ..SyntheticSpec::default()
    };
    let (layout, designs) = synth_designs(600, seed, &spec);
    let n = designs.len();
    let model = ModelSpec::new(arch).hidden(hidden).seed(seed);
    let schedule = OnlineSchedule::new(300, 28, 1.0, 0.01);
    run_backtest(&model, &schedule, &layout, &designs, designs[n - 200].date, designs[n - 1].date)
        .unwrap()
        .metrics
        .mae
}

fn c6_hybrid() -> Outcome {
    let t = Instant::now();
    let mut nonlinear_wins = 0;
    let mut linear_wins = 0;
    let mut rows = Vec::new();
    for seed in 0..10u64 {
        let hybrid = test_mae("MLPReducedLinear", 16, 20.0, seed);
        let linear_nl = test_mae("ReducedLinear", 0, 20.0, seed);
        let linear = test_mae("ReducedLinear", 0, 0.0, seed);
        let mlp = test_mae("MLP", 16, 0.0, seed);
        nonlinear_wins += usize::from(hybrid <= linear_nl);
        linear_wins += usize::from(linear <= mlp);
        rows.push(format!("{hybrid:.2}/{linear_nl:.2} {linear:.2}/{mlp:.2}"));
    }
    let pass = nonlinear_wins >= 8 && linear_wins >= 8;
    let o = outcome(
        pass,
        format!(
            "hybrid <= linear on nonlinear data in {nonlinear_wins}/10, linear <= MLP on linear data in {linear_wins}/10 [{}]",
            rows.join(", ")
        ),
    );
    within_time(o, t.elapsed().as_secs_f64(), 600.0)
}

fn c7_metrics() -> Outcome {
    let (_, designs) = synth_designs(120, 7, &SyntheticSpec::default());
    let realized: Vec<DayHours> = designs.iter().map(|d| d.targets).collect();
    let naive: Vec<DayHours> = designs.iter().map(naive_from_design).collect();
    let r = rmae(&naive, &realized, &naive).unwrap();

    let dm = dm_from_differential(&[-1.0, 0.0, -1.0, 0.0]).unwrap();
    let hand = (dm.statistic + 1.732).abs() < 1e-3 && (dm.p_value - 0.0416).abs() < 1e-3;

    let mut rng = rng_from_seed(77);
    let mut antisymmetric = true;
    for _ in 0..50 {
        let a: Vec<DayHours> = realized.iter().map(|y| y.map(|v| v + rng.gen_range(-9.0..9.0))).collect();
        let b: Vec<DayHours> = realized.iter().map(|y| y.map(|v| v + rng.gen_range(-9.0..9.0))).collect();
        let ab = dm_test(&a, &b, &realized).unwrap().statistic;
        let ba = dm_test(&b, &a, &realized).unwrap().statistic;
        antisymmetric &= ab.to_bits() == (-ba).to_bits();
    }
    outcome(
        r == 1.0 && hand && antisymmetric,
        format!(
            "rMAE(naive) = {r}; DM statistic {:.4}, p {:.4}; antisymmetry {antisymmetric}",
            dm.statistic, dm.p_value
        ),
    )
}

fn best_of(sampler: &str, seed: u64) -> f64 {
    let space = SearchSpace {
        params: vec![ParamDef::new("x", ParamKind::Float, -10.0, 10.0)],
    };
    let mut cfg = StudyConfig::new(100);
    cfg.sampler = sampler.to_string();
    let objective = |a: &Assignment, _seed: u64| {
        Ok(TrialOutput {
            mae: 1.0 + (a["x"] - 3.0).powi(2),
            forecasts: Vec::new(),
        })
    };
    run_study(&space, &cfg, &objective, seed).unwrap()[0].mae
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn c8_tpe() -> Outcome {
    let t = Instant::now();
    let tpe: Vec<f64> = (0..20).map(|s| best_of("tpe", s)).collect();
    let random: Vec<f64> = (0..20).map(|s| best_of("random", s)).collect();
    let hits = tpe.iter().filter(|b| **b <= 1.05).count();
    let (mt, mr) = (median(tpe), median(random));
    let o = outcome(
        hits >= 16 && mt < mr,
        format!("TPE within 5% of the optimum in {hits}/20 seeds; median best TPE {mt:.6} vs random {mr:.6}"),
    );
    within_time(o, t.elapsed().as_secs_f64(), 60.0)
}

fn pipeline(dir: &Path) -> Result<f64, String> {
    let last = SyntheticSpec::default().start + Duration::days(1099);
    let test_start = last - Duration::days(729);
    let config = format!(
        r#"
seed = 2026
[data.synthetic]
n_days = 1100
[periods]
validation_start = "{}"
test_start = "{test_start}"
test_end = "{last}"
[schedule]
d_init = 300
d_up = 28
lr_init = 1.0
lr_up = 0.01
[[models]]
architecture = "MLPReducedLinear"
hidden_n = 16
"#,
        test_start - Duration::days(56)
    );
    let path = dir.join("epf.toml");
    fs::write(&path, config).map_err(|e| e.to_string())?;
    let ctx = Context::load(&path, None, None, None).map_err(|e| e.to_string())?;
    cmd_synth(&ctx).map_err(|e| e.to_string())?;
    cmd_backtest(&ctx).map_err(|e| e.to_string())?;
    let rows = cmd_evaluate(&ctx).map_err(|e| e.to_string())?;
    cmd_report(&ctx).map_err(|e| e.to_string())?;
    let model = rows.iter().find(|r| r.model == "MLPReducedLinear").ok_or("model row missing")?;
    if model.metrics.n_days != 730 {
        return Err(format!("{} test days instead of 730", model.metrics.n_days));
    }
    Ok(model.metrics.rmae)
}

/// Every reproducible output file, keyed by path relative to `out`.
fn outputs(out: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, acc: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, acc);
            } else {
                let name = path.file_name().unwrap().to_string_lossy();
                if name != "timing.json" && name != "pareto.csv" {
                    acc.insert(path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap());
                }
            }
        }
    }
    let mut acc = BTreeMap::new();
    walk(out, out, &mut acc);
    acc
}

fn c9_end_to_end() -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let t = Instant::now();
    let first = pipeline(a.path());
    let secs = t.elapsed().as_secs_f64();
    let second = pipeline(b.path());
    let (rmae, second) = match (first, second) {
        (Ok(r), Ok(s)) => (r, s),
        (Err(e), _) | (_, Err(e)) => return outcome(false, format!("pipeline error: {e}")),
    };
    let (oa, ob) = (outputs(&a.path().join("out")), outputs(&b.path().join("out")));
    let differing: Vec<String> = oa
        .keys()
        .chain(ob.keys())
        .filter(|k| oa.get(*k) != ob.get(*k))
        .map(|k| k.display().to_string())
        .collect();
    let identical = differing.is_empty() && rmae.to_bits() == second.to_bits();
    let o = outcome(
        rmae < 1.0 && identical,
        format!(
            "rMAE {rmae:.4} over 730 test days; {} files bit-identical across runs{}; first run {secs:.1} s",
            oa.len(),
            if identical { String::new() } else { format!(" except {differing:?}") }
        ),
    );
    within_time(o, secs, 120.0)
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 9] = [
        (1, "design-matrix widths", c1_widths),
        (2, "gradient vs finite differences", c2_gradient),
        (3, "Adam converges to OLS", c3_ols),
        (4, "BOA simplex and dominance", c4_boa),
        (5, "online vs full refit", c5_online_vs_refit),
        (6, "hybrid advantage", c6_hybrid),
        (7, "metrics and DM test", c7_metrics),
        (8, "TPE vs random search", c8_tpe),
        (9, "end-to-end pipeline", c9_end_to_end),
    ];
    let mut unexpected = 0;
    for (id, name, run) in criteria {
        let t = Instant::now();
        let o = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        let secs = t.elapsed().as_secs_f64();
        let known = KNOWN_FAILURES.iter().find(|(k, _)| *k == id).map(|(_, why)| *why);
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] {id} {name}: {} ({secs:.2} s)", o.detail);
        match (o.pass, known) {
            (false, Some(why)) => println!("       known failure: {why}"),
            (false, None) => unexpected += 1,
            _ => {}
        }
    }
    if unexpected > 0 {
        println!("{unexpected} criteria failed");
        std::process::exit(1);
    }
}
