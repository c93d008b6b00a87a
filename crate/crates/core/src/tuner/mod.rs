//! Hyperparameter search over online-backtest validation MAE.

mod space;
mod study;
mod tpe;

pub use space::{
    Assignment, ParamDef, ParamKind, SearchSpace, D_INIT_RANGE, D_UP_RANGE, HIDDEN_RANGE, LR_RANGE, OLS_SHARE_RANGE,
    PENALTY_RANGE,
};
pub use study::{
    rank, run_study, BacktestEvaluator, StudyConfig, TrialEvaluator, TrialOutput, TrialRecord, TrialTemplate,
};
pub use tpe::{
    default_samplers, n_good, samplers, Observation, RandomSampler, Sampler, SamplerRegistry, TpeConfig, TpeSampler,
};
