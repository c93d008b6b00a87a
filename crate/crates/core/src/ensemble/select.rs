use rayon::prelude::*;

use crate::ensemble::Combiner;
use crate::error::{EpfError, Result};
use crate::evaluation::mae;
use crate::marketdata::DayHours;

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// Candidate indices in the order they were added.
    pub members: Vec<usize>,
    /// Validation MAE of the combined ensemble after each addition.
    pub mae_path: Vec<f64>,
    /// The pool did not exceed the requested size, so every candidate was
    /// taken without a choice being made.
    pub whole_pool: bool,
}

/// Greedy forward selection.
///
/// Starts from the candidate with the lowest validation MAE, then repeatedly
/// adds the candidate whose combination with the current members has the
/// lowest validation MAE. Ties go to the lower candidate index.
pub fn forward_select(
    candidates: &[&[DayHours]],
    realized: &[DayHours],
    size: usize,
    combiner: &dyn Combiner,
) -> Result<Selection> {
    if candidates.is_empty() {
        return Err(EpfError::InvalidArgument("forward selection needs at least one candidate".into()));
    }
    if size == 0 {
        return Err(EpfError::InvalidArgument("ensemble size must be at least 1".into()));
    }
    let whole_pool = candidates.len() <= size;
    if whole_pool {
        log::warn!(
            "candidate pool has {} models, not more than the requested {size}; selecting all",
            candidates.len()
        );
    }
    let target = size.min(candidates.len());
    let single: Vec<f64> = candidates.iter().map(|c| mae(c, realized)).collect::<Result<_>>()?;
    let first = argmin(single.iter().copied().enumerate());
    let mut members = vec![first];
    let mut mae_path = vec![single[first]];
    while members.len() < target {
        let scores: Vec<(usize, f64)> = (0..candidates.len())
            .into_par_iter()
            .filter(|i| !members.contains(i))
            .map(|i| {
                let pool: Vec<&[DayHours]> = members.iter().chain(std::iter::once(&i)).map(|&m| candidates[m]).collect();
                let combo = combiner.combine(&pool, realized)?;
                Ok((i, mae(&combo.forecasts, realized)?))
            })
            .collect::<Result<_>>()?;
        let best = argmin(scores.iter().copied());
        let score = scores.iter().find(|(i, _)| *i == best).expect("scored").1;
        members.push(best);
        mae_path.push(score);
    }
    Ok(Selection {
        members,
        mae_path,
        whole_pool,
    })
}

/// Index of the smallest score, lowest index on ties; NaN never wins.
fn argmin(scores: impl Iterator<Item = (usize, f64)>) -> usize {
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scores {
        match best {
            None => best = Some((i, s)),
            Some((bi, bs)) => {
                if s < bs || (s == bs && i < bi) || (bs.is_nan() && !s.is_nan()) {
                    best = Some((i, s));
                }
            }
        }
    }
    best.expect("non-empty scores").0
}
