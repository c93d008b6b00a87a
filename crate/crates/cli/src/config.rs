//! Experiment configuration file.
//!
//! ```toml
//! seed = 7
//! out_dir = "out"
//!
//! [data]
//! csv = "raw/de.csv"              # with zone_config, or a [data.synthetic] table
//! zone_config = "zones/de.toml"
//!
//! [data.synthetic]
//! n_days = 1100
//! nonlinearity = 0.0
//!
//! [periods]
//! validation_start = "2020-01-01"
//! test_start = "2021-01-01"
//! test_end = "2021-12-31"         # optional, defaults to the last day
//!
//! [schedule]                      # default for every model
//! d_init = 365
//! d_up = 28
//! lr_init = 0.3
//! lr_up = 0.01
//!
//! [[models]]
//! architecture = "MLPReducedLinear"
//! hidden_n = 16
//! lambda1 = 1e-5
//!
//! [tuner]
//! n_trials = 20
//! ensemble_size = 10
//! bounds = { d_init = [56, 400] }
//! ```
//!
//! Relative paths are resolved against the directory holding the config.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use epf_core::marketdata::SyntheticSpec;
use epf_core::model::{architectures, ModelSpec, DEFAULT_LEAK};
use epf_core::online::{OnlineSchedule, DEFAULT_EPOCHS_INIT, DEFAULT_EPOCHS_UP};
use epf_core::tuner::{StudyConfig, TpeConfig};
use epf_core::{EpfError, Result};
use serde::{Deserialize, Serialize};

/// Names accepted in `tuner.bounds`.
pub const HYPERPARAMETERS: [&str; 8] = [
    "d_init",
    "d_up",
    "hidden_n",
    "lr_init",
    "lr_up",
    "lambda1",
    "lambda2",
    "ols_share_alpha",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    pub data: DataConfig,
    pub periods: Periods,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub models: Vec<ModelConfig>,
    #[serde(default)]
    pub tuner: TunerConfig,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub csv: Option<PathBuf>,
    pub zone_config: Option<PathBuf>,
    pub synthetic: Option<SyntheticConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n_days: usize,
    #[serde(flatten)]
    pub spec: SyntheticSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Periods {
    pub validation_start: NaiveDate,
    pub test_start: NaiveDate,
    pub test_end: Option<NaiveDate>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleConfig {
    pub d_init: usize,
    pub d_up: usize,
    pub epochs_init: usize,
    pub epochs_up: usize,
    pub lr_init: f64,
    pub lr_up: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            d_init: 365,
            d_up: 28,
            epochs_init: DEFAULT_EPOCHS_INIT,
            epochs_up: DEFAULT_EPOCHS_UP,
            lr_init: 0.3,
            lr_up: 0.01,
        }
    }
}

impl ScheduleConfig {
    pub fn to_schedule(self) -> OnlineSchedule {
        OnlineSchedule::new(self.d_init, self.d_up, self.lr_init, self.lr_up).epochs(self.epochs_init, self.epochs_up)
    }
}

/// Partial schedule override inside a `[[models]]` entry.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleOverride {
    pub d_init: Option<usize>,
    pub d_up: Option<usize>,
    pub epochs_init: Option<usize>,
    pub epochs_up: Option<usize>,
    pub lr_init: Option<f64>,
    pub lr_up: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Output name; defaults to the architecture.
    pub name: Option<String>,
    pub architecture: String,
    #[serde(default)]
    pub hidden_n: usize,
    #[serde(default)]
    pub lambda1: f64,
    #[serde(default)]
    pub lambda2: f64,
    pub ols_share_alpha: Option<f64>,
    #[serde(default)]
    pub schedule: ScheduleOverride,
    /// Backtest with the best trial of this model's tuning study.
    #[serde(default)]
    pub use_study: bool,
    /// Parameter file to start the backtest from.
    pub warm_start: Option<PathBuf>,
}

impl ModelConfig {
    pub fn name(&self) -> &str {
        self.name.as_deref().unwrap_or(&self.architecture)
    }

    pub fn spec(&self, seed: u64) -> ModelSpec {
        ModelSpec {
            architecture: self.architecture.clone(),
            hidden_n: self.hidden_n,
            leak_alpha: DEFAULT_LEAK,
            lambda1: self.lambda1,
            lambda2: self.lambda2,
            ols_share_alpha: self.ols_share_alpha,
            seed,
        }
    }

    pub fn schedule(&self, base: &ScheduleConfig) -> OnlineSchedule {
        let o = &self.schedule;
        ScheduleConfig {
            d_init: o.d_init.unwrap_or(base.d_init),
            d_up: o.d_up.unwrap_or(base.d_up),
            epochs_init: o.epochs_init.unwrap_or(base.epochs_init),
            epochs_up: o.epochs_up.unwrap_or(base.epochs_up),
            lr_init: o.lr_init.unwrap_or(base.lr_init),
            lr_up: o.lr_up.unwrap_or(base.lr_up),
        }
        .to_schedule()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TunerConfig {
    pub n_trials: usize,
    pub sampler: String,
    pub gamma: f64,
    pub n_startup: usize,
    pub n_candidates: usize,
    pub suggest_batch: usize,
    /// Members per forward-selected ensemble.
    pub ensemble_size: usize,
    /// Best trials pooled across classes for the cross-class ensemble.
    pub boa_all_pool: usize,
    /// Search-range overrides, `name = [low, high]`.
    pub bounds: BTreeMap<String, [f64; 2]>,
}

impl Default for TunerConfig {
    fn default() -> Self {
        let tpe = TpeConfig::default();
        Self {
            n_trials: 20,
            sampler: "tpe".into(),
            gamma: tpe.gamma,
            n_startup: tpe.n_startup,
            n_candidates: tpe.n_candidates,
            suggest_batch: 1,
            ensemble_size: 10,
            boa_all_pool: 500,
            bounds: BTreeMap::new(),
        }
    }
}

impl TunerConfig {
    pub fn study(&self, jobs: usize) -> StudyConfig {
        StudyConfig {
            n_trials: self.n_trials,
            sampler: self.sampler.clone(),
            tpe: TpeConfig {
                gamma: self.gamma,
                n_startup: self.n_startup,
                n_candidates: self.n_candidates,
            },
            suggest_batch: self.suggest_batch,
            jobs,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| EpfError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file and resolves its relative paths.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| EpfError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.out_dir);
        if let Some(p) = cfg.data.csv.as_mut() {
            resolve(p);
        }
        if let Some(p) = cfg.data.zone_config.as_mut() {
            resolve(p);
        }
        for m in &mut cfg.models {
            if let Some(p) = m.warm_start.as_mut() {
                resolve(p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.data;
        match (&d.csv, &d.zone_config, &d.synthetic) {
            (Some(_), Some(_), None) | (None, None, Some(_)) => {}
            (Some(_), None, _) => return Err(EpfError::Config("data.csv needs data.zone_config".into())),
            _ => {
                return Err(EpfError::Config(
                    "give either data.csv with data.zone_config or a [data.synthetic] table".into(),
                ))
            }
        }
        let p = &self.periods;
        if p.test_start <= p.validation_start {
            return Err(EpfError::Config(format!(
                "test period ({}) must start after the validation period ({})",
                p.test_start, p.validation_start
            )));
        }
        if p.test_end.is_some_and(|e| e < p.test_start) {
            return Err(EpfError::Config("test_end precedes test_start".into()));
        }
        let mut names = std::collections::BTreeSet::new();
        for m in &self.models {
            architectures().get(&m.architecture)?;
            if !names.insert(m.name()) {
                return Err(EpfError::Config(format!("duplicate model name `{}`", m.name())));
            }
            if m.name().contains(['/', '\\']) || m.name().is_empty() {
                return Err(EpfError::Config(format!("invalid model name `{}`", m.name())));
            }
            m.schedule(&self.schedule).validate()?;
        }
        for name in self.tuner.bounds.keys() {
            if !HYPERPARAMETERS.contains(&name.as_str()) {
                return Err(EpfError::Config(format!("tuner.bounds: unknown hyperparameter `{name}`")));
            }
        }
        if self.tuner.ensemble_size == 0 || self.tuner.n_trials == 0 {
            return Err(EpfError::Config("tuner.n_trials and tuner.ensemble_size must be positive".into()));
        }
        Ok(())
    }

    pub fn model(&self, name: &str) -> Result<&ModelConfig> {
        self.models.iter().find(|m| m.name() == name).ok_or_else(|| EpfError::UnknownName {
            kind: "model",
            name: name.to_string(),
        })
    }
}
