use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{EpfError, Result};
use crate::features::DayDesign;
use crate::marketdata::HOURS;
use crate::model::{Model, ParamSet, SkipInput};
use crate::seed::{derive_seed, rng_from_seed};

/// Ridge added to the normal-equation diagonal when the Gram matrix is not
/// positive definite.
pub const OLS_JITTER: f64 = 1e-8;

fn fill_uniform(rng: &mut impl Rng, out: &mut [f64], fan_in: usize) {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    for v in out {
        *v = rng.gen_range(-bound..bound);
    }
}

/// Scaled-uniform initialization: every weight is drawn from
/// `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`, biases are zero. Draw order is skip
/// weights (hour by hour), then `W1`, then `W2`.
pub fn init_random(model: &Model) -> ParamSet {
    let mut params = ParamSet::zeros(model.shape().clone());
    let mut rng = rng_from_seed(derive_seed(model.spec.seed, "init", 0));
    for h in 0..params.shape.skip_widths.len() {
        let fan_in = params.shape.skip_widths[h];
        fill_uniform(&mut rng, params.skip_weights_mut(h), fan_in);
    }
    let o = params.offsets();
    let input_dim = params.shape.input_dim;
    let hidden = params.shape.hidden_n;
    fill_uniform(&mut rng, &mut params.values[o.w1], input_dim);
    fill_uniform(&mut rng, &mut params.values[o.w2], hidden);
    params
}

/// Per-hour least squares of the price on an intercept and the standardized
/// reduced regressors, solved through the normal equations.
///
/// Returns `(intercepts, slopes)`.
pub(crate) fn ols_reduced(train: &[DayDesign]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let first = train
        .first()
        .ok_or_else(|| EpfError::InvalidArgument("OLS initialization needs training days".into()))?;
    let mut intercepts = Vec::with_capacity(HOURS);
    let mut slopes = Vec::with_capacity(HOURS);
    for h in 0..HOURS {
        let p = first.reduced_x[h].len() + 1;
        if train.len() < p {
            return Err(EpfError::InvalidArgument(format!(
                "OLS initialization needs more than {} training days, got {}",
                p - 1,
                train.len()
            )));
        }
        let mut gram = DMatrix::<f64>::zeros(p, p);
        let mut rhs = DVector::<f64>::zeros(p);
        let mut row = vec![0.0; p];
        for d in train {
            row[0] = 1.0;
            row[1..].copy_from_slice(&d.reduced_x[h]);
            let y = d.targets[h];
            for i in 0..p {
                rhs[i] += row[i] * y;
                for j in 0..=i {
                    gram[(i, j)] += row[i] * row[j];
                }
            }
        }
        for i in 0..p {
            for j in 0..i {
                gram[(j, i)] = gram[(i, j)];
            }
        }
        let chol = gram.clone().cholesky().or_else(|| {
            let mut jittered = gram.clone();
            for i in 0..p {
                jittered[(i, i)] += OLS_JITTER;
            }
            jittered.cholesky()
        });
        let beta = chol
            .ok_or_else(|| EpfError::Numerical(format!("hour {h}: singular normal equations")))?
            .solve(&rhs);
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(EpfError::Numerical(format!("hour {h}: non-finite OLS coefficients")));
        }
        intercepts.push(beta[0]);
        slopes.push(beta.iter().skip(1).copied().collect());
    }
    Ok((intercepts, slopes))
}

/// OLS-based initialization: skip weights are `alpha * beta_ols`, skip
/// biases take the OLS intercepts, and any MLP block is random.
pub fn init_ols(model: &Model, train: &[DayDesign]) -> Result<ParamSet> {
    if model.skip_input() != SkipInput::Reduced {
        return Err(EpfError::InvalidArgument(format!(
            "{} has no reduced skip connection to initialize by OLS",
            model.architecture().name()
        )));
    }
    let alpha = model.spec.ols_share_alpha.ok_or_else(|| {
        EpfError::InvalidArgument("OLS initialization requires ols_share_alpha".into())
    })?;
    let (intercepts, slopes) = ols_reduced(train)?;
    let mut params = init_random(model);
    for (h, beta) in slopes.iter().enumerate() {
        let w = params.skip_weights_mut(h);
        if w.len() != beta.len() {
            return Err(EpfError::dim(w.len(), beta.len(), "OLS slopes"));
        }
        for (wi, b) in w.iter_mut().zip(beta) {
            *wi = alpha * b;
        }
    }
    let o = params.offsets();
    params.values[o.skip_bias].copy_from_slice(&intercepts);
    Ok(params)
}
