use std::sync::Arc;
use std::time::Instant;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{EpfError, Result};
use crate::features::{DayDesign, FeatureLayout};
use crate::marketdata::DayHours;
use crate::model::ModelSpec;
use crate::online::{run_backtest, OnlineSchedule};
use crate::seed::derive_seed;
use crate::tuner::space::{Assignment, SearchSpace};
use crate::tuner::tpe::{samplers, Observation, Sampler, TpeConfig, TpeSampler};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub n_trials: usize,
    #[serde(default = "default_sampler")]
    pub sampler: String,
    #[serde(default)]
    pub tpe: TpeConfig,
    /// Trials suggested from the same history before any of them is
    /// evaluated. Results depend on this, never on `jobs`.
    #[serde(default = "one")]
    pub suggest_batch: usize,
    #[serde(default = "one")]
    pub jobs: usize,
}

fn default_sampler() -> String {
    "tpe".into()
}

fn one() -> usize {
    1
}

impl StudyConfig {
    pub fn new(n_trials: usize) -> Self {
        Self {
            n_trials,
            sampler: default_sampler(),
            tpe: TpeConfig::default(),
            suggest_batch: 1,
            jobs: 1,
        }
    }

    pub fn sampler(&self) -> Result<Arc<dyn Sampler>> {
        if self.sampler == "tpe" {
            Ok(Arc::new(TpeSampler::new(self.tpe)))
        } else {
            samplers().get(&self.sampler)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub id: usize,
    pub params: Assignment,
    /// Validation MAE, `+inf` for failed trials.
    pub mae: f64,
    pub forecasts: Vec<DayHours>,
    pub runtime_secs: f64,
    pub failed: bool,
    pub error: Option<String>,
}

pub struct TrialOutput {
    pub mae: f64,
    pub forecasts: Vec<DayHours>,
}

/// Scores one hyperparameter assignment.
pub trait TrialEvaluator: Sync {
    fn evaluate(&self, params: &Assignment, seed: u64) -> Result<TrialOutput>;
}

impl<F> TrialEvaluator for F
where
    F: Fn(&Assignment, u64) -> Result<TrialOutput> + Sync,
{
    fn evaluate(&self, params: &Assignment, seed: u64) -> Result<TrialOutput> {
        self(params, seed)
    }
}

/// Fixed settings a trial's assignment is layered onto.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialTemplate {
    pub spec: ModelSpec,
    pub schedule: OnlineSchedule,
}

impl TrialTemplate {
    /// Model spec and schedule for an assignment; names absent from the
    /// assignment keep the template value. `d_up` is capped at `d_init`.
    pub fn apply(&self, a: &Assignment, seed: u64) -> (ModelSpec, OnlineSchedule) {
        let mut spec = self.spec.clone();
        let mut sched = self.schedule;
        let int = |v: f64| v.round().max(1.0) as usize;
        for (name, &v) in a {
            match name.as_str() {
                "d_init" => sched.d_init = int(v),
                "d_up" => sched.d_up = int(v),
                "hidden_n" => spec.hidden_n = int(v),
                "lr_init" => sched.lr_init = v,
                "lr_up" => sched.lr_up = v,
                "lambda1" => spec.lambda1 = v,
                "lambda2" => spec.lambda2 = v,
                "ols_share_alpha" => spec.ols_share_alpha = Some(v),
                _ => {}
            }
        }
        sched.d_up = sched.d_up.min(sched.d_init);
        spec.seed = seed;
        (spec, sched)
    }
}

/// Online backtest over a validation period.
pub struct BacktestEvaluator<'a> {
    pub template: TrialTemplate,
    pub layout: &'a FeatureLayout,
    pub designs: &'a [DayDesign],
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl TrialEvaluator for BacktestEvaluator<'_> {
    fn evaluate(&self, params: &Assignment, seed: u64) -> Result<TrialOutput> {
        let (spec, sched) = self.template.apply(params, seed);
        let res = run_backtest(&spec, &sched, self.layout, self.designs, self.start, self.end)?;
        Ok(TrialOutput {
            mae: res.metrics.mae,
            forecasts: res.forecasts,
        })
    }
}

fn run_trial(id: usize, params: Assignment, evaluator: &dyn TrialEvaluator, seed: u64) -> TrialRecord {
    let t = Instant::now();
    let outcome = evaluator
        .evaluate(&params, derive_seed(seed, "trial", id as u64))
        .and_then(|o| {
            if o.mae.is_finite() {
                Ok(o)
            } else {
                Err(EpfError::Numerical(format!("validation MAE is {}", o.mae)))
            }
        });
    let runtime_secs = t.elapsed().as_secs_f64();
    match outcome {
        Ok(o) => TrialRecord {
            id,
            params,
            mae: o.mae,
            forecasts: o.forecasts,
            runtime_secs,
            failed: false,
            error: None,
        },
        Err(e) => {
            log::warn!("trial {id} failed: {e}");
            TrialRecord {
                id,
                params,
                mae: f64::INFINITY,
                forecasts: Vec::new(),
                runtime_secs,
                failed: true,
                error: Some(e.to_string()),
            }
        }
    }
}

/// Runs `cfg.n_trials` trials and returns them ranked by MAE (then id),
/// failed trials last.
pub fn run_study(space: &SearchSpace, cfg: &StudyConfig, evaluator: &dyn TrialEvaluator, seed: u64) -> Result<Vec<TrialRecord>> {
    space.validate()?;
    if cfg.n_trials == 0 {
        return Err(EpfError::InvalidArgument("n_trials must be at least 1".into()));
    }
    let sampler = cfg.sampler()?;
    let batch = cfg.suggest_batch.max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs.max(1))
        .build()
        .map_err(|e| EpfError::InvalidArgument(format!("thread pool: {e}")))?;
    let mut records: Vec<TrialRecord> = Vec::with_capacity(cfg.n_trials);
    let mut history: Vec<Observation> = Vec::with_capacity(cfg.n_trials);
    while records.len() < cfg.n_trials {
        let first = records.len();
        let ids: Vec<usize> = (first..cfg.n_trials.min(first + batch)).collect();
        let suggestions: Vec<(usize, Assignment)> = ids
            .iter()
            .map(|&id| (id, sampler.suggest(&history, space, derive_seed(seed, "suggest", id as u64))))
            .collect();
        let done: Vec<TrialRecord> = pool.install(|| {
            suggestions
                .into_par_iter()
                .map(|(id, a)| run_trial(id, a, evaluator, seed))
                .collect()
        });
        for r in done {
            history.push(Observation {
                params: r.params.clone(),
                value: r.mae,
            });
            records.push(r);
        }
    }
    rank(&mut records);
    Ok(records)
}

pub fn rank(records: &mut [TrialRecord]) {
    records.sort_by(|a, b| a.failed.cmp(&b.failed).then(a.mae.total_cmp(&b.mae)).then(a.id.cmp(&b.id)));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tuner::space::{ParamDef, ParamKind};

    fn space() -> SearchSpace {
        SearchSpace {
            params: vec![
                ParamDef::new("x", ParamKind::Float, -5.0, 5.0),
                ParamDef::new("d_up", ParamKind::Int, 1.0, 10.0),
            ],
        }
    }

    fn quad(a: &Assignment, _seed: u64) -> Result<TrialOutput> {
        if a["d_up"] == 10.0 {
            return Err(EpfError::Numerical("diverged".into()));
        }
        Ok(TrialOutput {
            mae: (a["x"] - 1.0).powi(2) + a["d_up"],
            forecasts: Vec::new(),
        })
    }

    #[test]
    fn single_trial() {
        let r = run_study(&space(), &StudyConfig::new(1), &quad, 3).unwrap();
        assert_eq!(r.len(), 1);
    }

    #[test]
    fn ranked_deterministic_and_failures_last() {
        let cfg = StudyConfig::new(40);
        let a = run_study(&space(), &cfg, &quad, 9).unwrap();
        let b = run_study(&space(), &cfg, &quad, 9).unwrap();
        let key = |r: &[TrialRecord]| r.iter().map(|t| (t.id, t.mae.to_bits())).collect::<Vec<_>>();
        assert_eq!(key(&a), key(&b));
        let finite: Vec<f64> = a.iter().filter(|t| !t.failed).map(|t| t.mae).collect();
        assert!(finite.windows(2).all(|w| w[0] <= w[1]));
        let first_failed = a.iter().position(|t| t.failed).unwrap_or(a.len());
        assert!(a[first_failed..].iter().all(|t| t.failed && t.mae == f64::INFINITY));
        assert!(a.iter().all(|t| space().contains(&t.params)));
    }

    #[test]
    fn jobs_do_not_change_results() {
        let mut cfg = StudyConfig::new(24);
        cfg.suggest_batch = 4;
        let a = run_study(&space(), &cfg, &quad, 2).unwrap();
        cfg.jobs = 4;
        let b = run_study(&space(), &cfg, &quad, 2).unwrap();
        let key = |r: &[TrialRecord]| r.iter().map(|t| (t.id, t.mae.to_bits())).collect::<Vec<_>>();
        assert_eq!(key(&a), key(&b));
    }

    #[test]
    fn longer_study_never_worse() {
        let short = run_study(&space(), &StudyConfig::new(15), &quad, 4).unwrap();
        let long = run_study(&space(), &StudyConfig::new(60), &quad, 4).unwrap();
        assert!(long[0].mae <= short[0].mae);
    }

    #[test]
    fn template_application() {
        let t = TrialTemplate {
            spec: ModelSpec::new("MLPReducedLinearOLS").hidden(8).ols_share(1.0),
            schedule: OnlineSchedule::new(100, 7, 1e-2, 1e-3),
        };
        let a: Assignment = [("d_init", 30.0), ("d_up", 50.0), ("hidden_n", 17.0), ("ols_share_alpha", 0.4)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        let (spec, sched) = t.apply(&a, 77);
        assert_eq!((sched.d_init, sched.d_up), (30, 30));
        assert_eq!(spec.hidden_n, 17);
        assert_eq!(spec.ols_share_alpha, Some(0.4));
        assert_eq!(spec.seed, 77);
        assert_eq!(sched.lr_up, 1e-3);
    }
}
