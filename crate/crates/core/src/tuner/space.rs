use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{EpfError, Result};
use crate::model::architectures;

/// One sampled hyperparameter assignment, keyed by name.
pub type Assignment = BTreeMap<String, f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    Int,
    LogInt,
    Float,
    LogFloat,
}

impl ParamKind {
    pub fn is_log(self) -> bool {
        matches!(self, ParamKind::LogInt | ParamKind::LogFloat)
    }

    pub fn is_int(self) -> bool {
        matches!(self, ParamKind::Int | ParamKind::LogInt)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDef {
    pub name: String,
    pub kind: ParamKind,
    pub low: f64,
    pub high: f64,
}

impl ParamDef {
    pub fn new(name: &str, kind: ParamKind, low: f64, high: f64) -> Self {
        Self {
            name: name.to_string(),
            kind,
            low,
            high,
        }
    }

    /// Bounds in the sampling space (log-transformed where declared;
    /// integers widened by half a unit so the end points are as likely as
    /// interior values).
    pub fn internal_bounds(&self) -> (f64, f64) {
        let (mut lo, mut hi) = (self.low, self.high);
        if self.kind.is_int() {
            lo -= 0.5;
            hi += 0.5;
        }
        if self.kind.is_log() {
            (lo.max(f64::MIN_POSITIVE).ln(), hi.ln())
        } else {
            (lo, hi)
        }
    }

    pub fn to_internal(&self, value: f64) -> f64 {
        if self.kind.is_log() {
            value.ln()
        } else {
            value
        }
    }

    /// Maps an internal coordinate back to a legal value.
    pub fn from_internal(&self, z: f64) -> f64 {
        let v = if self.kind.is_log() { z.exp() } else { z };
        let v = if self.kind.is_int() { v.round() } else { v };
        v.clamp(self.low, self.high)
    }

    pub fn sample_uniform(&self, rng: &mut impl Rng) -> f64 {
        let (lo, hi) = self.internal_bounds();
        self.from_internal(rng.gen_range(lo..hi))
    }
}

/// Ordered set of tuned hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub params: Vec<ParamDef>,
}

pub const D_INIT_RANGE: (f64, f64) = (56.0, 1092.0);
pub const D_UP_RANGE: (f64, f64) = (1.0, 56.0);
pub const HIDDEN_RANGE: (f64, f64) = (8.0, 256.0);
pub const LR_RANGE: (f64, f64) = (1e-4, 1e-1);
pub const PENALTY_RANGE: (f64, f64) = (1e-6, 10.0);
pub const OLS_SHARE_RANGE: (f64, f64) = (0.0, 2.0);

impl SearchSpace {
    /// Default space for an architecture. `max_d_init` caps the initial
    /// window by the history available before the validation period.
    pub fn for_architecture(architecture: &str, max_d_init: usize) -> Result<Self> {
        let arch = architectures().get(architecture)?;
        let d_init_high = D_INIT_RANGE.1.min(max_d_init as f64);
        let mut params = vec![
            ParamDef::new("d_init", ParamKind::Int, D_INIT_RANGE.0.min(d_init_high - 1.0), d_init_high),
            ParamDef::new("d_up", ParamKind::Int, D_UP_RANGE.0, D_UP_RANGE.1),
        ];
        if arch.has_hidden_layer() {
            params.push(ParamDef::new("hidden_n", ParamKind::LogInt, HIDDEN_RANGE.0, HIDDEN_RANGE.1));
        }
        for name in ["lr_init", "lr_up"] {
            params.push(ParamDef::new(name, ParamKind::LogFloat, LR_RANGE.0, LR_RANGE.1));
        }
        for name in ["lambda1", "lambda2"] {
            params.push(ParamDef::new(name, ParamKind::LogFloat, PENALTY_RANGE.0, PENALTY_RANGE.1));
        }
        if arch.uses_ols_init() {
            params.push(ParamDef::new("ols_share_alpha", ParamKind::Float, OLS_SHARE_RANGE.0, OLS_SHARE_RANGE.1));
        }
        let space = Self { params };
        space.validate()?;
        Ok(space)
    }

    pub fn validate(&self) -> Result<()> {
        if self.params.is_empty() {
            return Err(EpfError::InvalidArgument("search space is empty".into()));
        }
        for p in &self.params {
            if !(p.low.is_finite() && p.high.is_finite() && p.low < p.high) {
                return Err(EpfError::InvalidArgument(format!(
                    "{}: bounds must be finite with low < high, got [{}, {}]",
                    p.name, p.low, p.high
                )));
            }
            if p.kind.is_log() && p.low <= 0.0 {
                return Err(EpfError::InvalidArgument(format!("{}: log scale needs low > 0", p.name)));
            }
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&ParamDef> {
        self.params.iter().find(|p| p.name == name)
    }

    /// Replaces the bounds of `name`.
    pub fn set_bounds(&mut self, name: &str, low: f64, high: f64) -> Result<()> {
        let p = self
            .params
            .iter_mut()
            .find(|p| p.name == name)
            .ok_or_else(|| EpfError::UnknownName {
                kind: "hyperparameter",
                name: name.to_string(),
            })?;
        p.low = low;
        p.high = high;
        self.validate()
    }

    pub fn contains(&self, a: &Assignment) -> bool {
        self.params.iter().all(|p| {
            a.get(&p.name)
                .is_some_and(|v| *v >= p.low && *v <= p.high && (!p.kind.is_int() || v.fract() == 0.0))
        })
    }

    pub fn sample_uniform(&self, rng: &mut impl Rng) -> Assignment {
        self.params
            .iter()
            .map(|p| (p.name.clone(), p.sample_uniform(rng)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_spaces_per_architecture() {
        let rl = SearchSpace::for_architecture("ReducedLinear", 2000).unwrap();
        let names: Vec<&str> = rl.params.iter().map(|p| p.name.as_str()).collect();
        assert_eq!(names, vec!["d_init", "d_up", "lr_init", "lr_up", "lambda1", "lambda2"]);
        let hy = SearchSpace::for_architecture("MLPReducedLinearOLS", 300).unwrap();
        assert!(hy.get("hidden_n").is_some());
        assert_eq!(hy.get("ols_share_alpha").unwrap().high, 2.0);
        assert_eq!(hy.get("d_init").unwrap().high, 300.0);
        assert!(SearchSpace::for_architecture("Nope", 100).is_err());
    }

    #[test]
    fn invalid_bounds_rejected() {
        let mut s = SearchSpace::for_architecture("MLP", 500).unwrap();
        assert!(s.set_bounds("lr_init", 0.0, 1.0).is_err());
        assert!(s.set_bounds("d_up", 5.0, 5.0).is_err());
        assert!(s.set_bounds("zzz", 1.0, 2.0).is_err());
    }

    proptest! {
        #[test]
        fn uniform_draws_in_bounds(seed in any::<u64>()) {
            let s = SearchSpace::for_architecture("MLPReducedLinearOLS", 700).unwrap();
            let mut rng = crate::seed::rng_from_seed(seed);
            for _ in 0..20 {
                let a = s.sample_uniform(&mut rng);
                prop_assert!(s.contains(&a), "{:?}", a);
            }
        }
    }
}
