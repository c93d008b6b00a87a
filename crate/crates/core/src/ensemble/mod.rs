//! Forecast combination: equal weights and fully adaptive Bernstein Online
//! Aggregation (BOA), plus greedy forward selection of ensemble members.

mod boa;
mod select;

pub use boa::BoaState;
pub use select::{forward_select, Selection};

use std::io::Write;
use std::sync::{Arc, OnceLock};

use chrono::NaiveDate;

use crate::error::{EpfError, Result};
use crate::marketdata::{DayHours, HOURS};
use crate::registry::Registry;

/// Per-hour weights of every expert: `weights[k][h]`.
pub type ExpertWeights = Vec<[f64; HOURS]>;

/// Convex combination of `K` expert forecasts, hour by hour.
pub fn ensemble_predict(weights: &[[f64; HOURS]], experts: &[DayHours]) -> Result<DayHours> {
    if weights.len() != experts.len() {
        return Err(EpfError::dim(weights.len(), experts.len(), "expert count"));
    }
    let mut out = [0.0; HOURS];
    for (w, f) in weights.iter().zip(experts) {
        for h in 0..HOURS {
            out[h] += w[h] * f[h];
        }
    }
    Ok(out)
}

/// Result of running a combiner over a period.
#[derive(Debug, Clone, PartialEq)]
pub struct Combination {
    pub forecasts: Vec<DayHours>,
    /// Weights used for each day, before that day's prices were revealed.
    pub weights: Vec<ExpertWeights>,
}

/// Online combination rule.
pub trait Combiner: Send + Sync {
    fn name(&self) -> &'static str;

    /// Combines `experts[k][day]` sequentially, revealing `realized[day]`
    /// after each day's forecast.
    fn combine(&self, experts: &[&[DayHours]], realized: &[DayHours]) -> Result<Combination>;
}

fn check_pool(experts: &[&[DayHours]], realized: &[DayHours]) -> Result<()> {
    if experts.is_empty() {
        return Err(EpfError::InvalidArgument("empty expert pool".into()));
    }
    for e in experts {
        if e.len() != realized.len() {
            return Err(EpfError::dim(realized.len(), e.len(), "expert forecast days"));
        }
    }
    Ok(())
}

fn day_slice(experts: &[&[DayHours]], day: usize) -> Vec<DayHours> {
    experts.iter().map(|e| e[day]).collect()
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EqualWeights;

impl Combiner for EqualWeights {
    fn name(&self) -> &'static str {
        "equal"
    }

    fn combine(&self, experts: &[&[DayHours]], realized: &[DayHours]) -> Result<Combination> {
        check_pool(experts, realized)?;
        let w = vec![[1.0 / experts.len() as f64; HOURS]; experts.len()];
        let forecasts = (0..realized.len())
            .map(|d| ensemble_predict(&w, &day_slice(experts, d)))
            .collect::<Result<_>>()?;
        Ok(Combination {
            forecasts,
            weights: vec![w; realized.len()],
        })
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Boa;

impl Combiner for Boa {
    fn name(&self) -> &'static str {
        "boa"
    }

    fn combine(&self, experts: &[&[DayHours]], realized: &[DayHours]) -> Result<Combination> {
        check_pool(experts, realized)?;
        let mut state = BoaState::new(experts.len());
        let mut forecasts = Vec::with_capacity(realized.len());
        let mut weights = Vec::with_capacity(realized.len());
        for (d, y) in realized.iter().enumerate() {
            let day = day_slice(experts, d);
            forecasts.push(state.predict(&day)?);
            weights.push(state.weights.clone());
            state.update(&day, y)?;
        }
        Ok(Combination { forecasts, weights })
    }
}

pub type CombinerRegistry = Registry<dyn Combiner>;

pub fn default_combiners() -> CombinerRegistry {
    let mut reg = CombinerRegistry::new("combiner");
    reg.register("equal", Arc::new(EqualWeights));
    reg.register("boa", Arc::new(Boa));
    reg
}

pub fn combiners() -> &'static CombinerRegistry {
    static REG: OnceLock<CombinerRegistry> = OnceLock::new();
    REG.get_or_init(default_combiners)
}

/// Writes a weight trajectory as `date,hour,expert,weight` rows.
pub fn write_weights_csv<W: Write>(out: W, dates: &[NaiveDate], experts: &[String], combo: &Combination) -> Result<()> {
    if dates.len() != combo.weights.len() {
        return Err(EpfError::dim(combo.weights.len(), dates.len(), "weight trajectory dates"));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["date", "hour", "expert", "weight"])?;
    for (date, day) in dates.iter().zip(&combo.weights) {
        for h in 0..HOURS {
            for (name, wk) in experts.iter().zip(day) {
                w.write_record([date.to_string(), h.to_string(), name.clone(), wk[h].to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_weights_average() {
        let experts: Vec<Vec<DayHours>> = (0..4).map(|k| vec![[k as f64 * 2.0; HOURS]]).collect();
        let refs: Vec<&[DayHours]> = experts.iter().map(Vec::as_slice).collect();
        let c = EqualWeights.combine(&refs, &[[0.0; HOURS]]).unwrap();
        assert_eq!(c.forecasts[0], [3.0; HOURS]);
    }

    #[test]
    fn vertex_and_identical_experts() {
        let a = [7.0; HOURS];
        let mut b = [1.0; HOURS];
        b[3] = -4.0;
        let mut w = vec![[0.0; HOURS], [1.0; HOURS]];
        assert_eq!(ensemble_predict(&w, &[a, b]).unwrap(), b);
        w[0] = [0.3; HOURS];
        w[1] = [0.7; HOURS];
        let same = ensemble_predict(&w, &[a, a]).unwrap();
        for h in 0..HOURS {
            assert!((same[h] - 7.0).abs() < 1e-14);
        }
        assert!(ensemble_predict(&w, &[a]).is_err());
    }

    #[test]
    fn registry_names() {
        let names: Vec<&str> = combiners().names().collect();
        assert_eq!(names, vec!["boa", "equal"]);
    }

    #[test]
    fn weights_csv_rows() {
        let experts = [vec![[1.0; HOURS]; 2], vec![[3.0; HOURS]; 2]];
        let refs: Vec<&[DayHours]> = experts.iter().map(Vec::as_slice).collect();
        let c = Boa.combine(&refs, &[[2.0; HOURS]; 2]).unwrap();
        let d0 = NaiveDate::from_ymd_opt(2024, 1, 1).unwrap();
        let mut buf = Vec::new();
        write_weights_csv(&mut buf, &[d0, d0.succ_opt().unwrap()], &["a".into(), "b".into()], &c).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 2 * 24 * 2);
        assert!(text.starts_with("date,hour,expert,weight\n2024-01-01,0,a,0.5\n"));
    }
}
