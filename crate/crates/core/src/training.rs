//! Regularized window loss, exact gradients, and Adam.
//!
//! The loss of a window of `N` standardized days is
//!
//! ```text
//! L = 1/(24N) sum_{d,h} |yhat_{d,h} - y_{d,h}|  +  lambda1 * sum theta^2  +  lambda2 * (|W2|_1 + |B|_1)
//! ```
//!
//! `theta` covers every trainable entry, biases included. `B` are the skip
//! weights (not their biases).

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{EpfError, Result};
use crate::features::DayDesign;
use crate::marketdata::HOURS;
use crate::model::{dot, leaky_relu, leaky_relu_grad, Model, ParamSet};

/// Data-fit term of the loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    /// Mean absolute error, the production loss.
    #[default]
    Absolute,
    /// Mean squared error, used by oracle tests.
    Squared,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Full-window training settings. One epoch is one gradient step on the
/// whole window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    #[serde(default)]
    pub adam: AdamConfig,
    #[serde(default)]
    pub loss: LossKind,
}

impl TrainConfig {
    pub fn new(epochs: usize, learning_rate: f64) -> Self {
        Self {
            epochs,
            learning_rate,
            adam: AdamConfig::default(),
            loss: LossKind::Absolute,
        }
    }

    pub fn with_loss(mut self, loss: LossKind) -> Self {
        self.loss = loss;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(EpfError::InvalidArgument("epochs must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(EpfError::InvalidArgument(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Adam moment accumulators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn for_params(params: &ParamSet) -> Self {
        Self::new(params.values.len())
    }
}

/// One bias-corrected Adam update in place.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, lr: f64, cfg: &AdamConfig) -> Result<()> {
    if params.len() != grads.len() || state.m.len() != params.len() {
        return Err(EpfError::dim(params.len(), grads.len(), "adam step"));
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(EpfError::Numerical(format!("non-finite gradient at coordinate {i}")));
    }
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
    Ok(())
}

/// A differentiable scalar objective over a flat parameter vector.
pub trait Objective {
    /// Writes the gradient into `grad` and returns the value.
    fn value_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> Result<f64>;

    fn value(&self, x: &[f64]) -> Result<f64> {
        let mut g = vec![0.0; x.len()];
        self.value_and_gradient(x, &mut g)
    }
}

/// Loss trace of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    /// Loss before each epoch's update.
    pub trace: Vec<f64>,
    /// Loss after the last update.
    pub final_loss: f64,
}

/// Runs `cfg.epochs` Adam steps on `obj` starting from `x`.
pub fn minimize<O: Objective + ?Sized>(obj: &O, x: &mut [f64], state: &mut AdamState, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut grad = vec![0.0; x.len()];
    let mut trace = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let value = obj.value_and_gradient(x, &mut grad)?;
        if !value.is_finite() {
            return Err(EpfError::Numerical(format!("loss became {value} at epoch {epoch}")));
        }
        trace.push(value);
        adam_step(x, &grad, state, cfg.learning_rate, &cfg.adam)?;
    }
    let final_loss = obj.value(x)?;
    if !final_loss.is_finite() {
        return Err(EpfError::Numerical(format!("loss became {final_loss} after training")));
    }
    Ok(TrainOutcome { trace, final_loss })
}

/// Regularized loss of a model over a window of standardized designs.
pub struct WindowObjective<'a> {
    pub model: &'a Model,
    pub designs: &'a [DayDesign],
    pub kind: LossKind,
}

impl Objective for WindowObjective<'_> {
    fn value_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> Result<f64> {
        loss_and_gradient(self.model, x, self.designs, self.kind, Some(grad))
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        loss_and_gradient(self.model, x, self.designs, self.kind, None)
    }
}

fn check_window(model: &Model, values: &[f64], designs: &[DayDesign]) -> Result<()> {
    let first = designs
        .first()
        .ok_or_else(|| EpfError::InvalidArgument("loss over an empty window".into()))?;
    if values.len() != model.shape().len() {
        return Err(EpfError::dim(model.shape().len(), values.len(), "parameter vector"));
    }
    let probe = ParamSet::zeros(model.shape().clone());
    model.check(&probe, first)
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn loss_and_gradient(
    model: &Model,
    values: &[f64],
    designs: &[DayDesign],
    kind: LossKind,
    mut grad: Option<&mut [f64]>,
) -> Result<f64> {
    check_window(model, values, designs)?;
    let shape = model.shape();
    let o = shape.offsets();
    let n_hidden = shape.hidden_n;
    let input_dim = shape.input_dim;
    let scale = 1.0 / (HOURS * designs.len()) as f64;
    let alpha = model.spec.leak_alpha;

    if let Some(g) = grad.as_deref_mut() {
        g.fill(0.0);
    }
    let mut z = vec![0.0; n_hidden];
    let mut act = vec![0.0; n_hidden];
    let mut delta = vec![0.0; n_hidden];
    let mut data_loss = 0.0;

    for d in designs {
        for j in 0..n_hidden {
            let row = o.w1.start + j * input_dim;
            z[j] = values[o.b1.start + j] + dot(&values[row..row + input_dim], &d.full_x);
            act[j] = leaky_relu(z[j], alpha);
        }
        delta.fill(0.0);
        for h in 0..HOURS {
            let mut y = 0.0;
            let skip_start = if shape.has_skip() {
                let start = o.skip_weights.start + o.skip_row_start[h];
                let x = model.skip_x(d, h);
                y += values[o.skip_bias.start + h] + dot(&values[start..start + x.len()], x);
                start
            } else {
                0
            };
            if n_hidden > 0 {
                let row = o.w2.start + h * n_hidden;
                y += values[o.b2.start + h] + dot(&values[row..row + n_hidden], &act);
            }
            let r = y - d.targets[h];
            let dy = match kind {
                LossKind::Absolute => {
                    data_loss += r.abs();
                    sign(r) * scale
                }
                LossKind::Squared => {
                    data_loss += r * r;
                    2.0 * r * scale
                }
            };
            let Some(g) = grad.as_deref_mut() else { continue };
            if dy == 0.0 {
                continue;
            }
            if shape.has_skip() {
                let x = model.skip_x(d, h);
                g[o.skip_bias.start + h] += dy;
                for (gi, xi) in g[skip_start..skip_start + x.len()].iter_mut().zip(x) {
                    *gi += dy * xi;
                }
            }
            if n_hidden > 0 {
                let row = o.w2.start + h * n_hidden;
                g[o.b2.start + h] += dy;
                for j in 0..n_hidden {
                    g[row + j] += dy * act[j];
                    delta[j] += dy * values[row + j];
                }
            }
        }
        if let Some(g) = grad.as_deref_mut() {
            for j in 0..n_hidden {
                let dz = delta[j] * leaky_relu_grad(z[j], alpha);
                if dz == 0.0 {
                    continue;
                }
                g[o.b1.start + j] += dz;
                let row = o.w1.start + j * input_dim;
                for (gi, xi) in g[row..row + input_dim].iter_mut().zip(&d.full_x) {
                    *gi += dz * xi;
                }
            }
        }
    }

    let lambda1 = model.spec.lambda1;
    let lambda2 = model.spec.lambda2;
    let l2: f64 = values.iter().map(|v| v * v).sum();
    let l1: f64 = values[o.skip_weights.clone()].iter().chain(&values[o.w2.clone()]).map(|v| v.abs()).sum();
    if let Some(g) = grad {
        if lambda1 != 0.0 {
            for (gi, v) in g.iter_mut().zip(values) {
                *gi += 2.0 * lambda1 * v;
            }
        }
        if lambda2 != 0.0 {
            for i in o.skip_weights.clone().chain(o.w2.clone()) {
                g[i] += lambda2 * sign(values[i]);
            }
        }
    }
    Ok(data_loss * scale + lambda1 * l2 + lambda2 * l1)
}

/// Regularized L1 loss of `params` on a standardized window.
pub fn loss(model: &Model, params: &ParamSet, designs: &[DayDesign]) -> Result<f64> {
    loss_with(model, params, designs, LossKind::Absolute)
}

pub fn loss_with(model: &Model, params: &ParamSet, designs: &[DayDesign], kind: LossKind) -> Result<f64> {
    loss_and_gradient(model, &params.values, designs, kind, None)
}

/// Exact (sub)gradient of the regularized loss, shaped like `params`.
/// Kinks of `|.|` take subgradient 0.
pub fn gradient(model: &Model, params: &ParamSet, designs: &[DayDesign], kind: LossKind) -> Result<ParamSet> {
    let mut g = ParamSet::zeros(params.shape.clone());
    loss_and_gradient(model, &params.values, designs, kind, Some(&mut g.values))?;
    Ok(g)
}

/// Trains `params` in place for `cfg.epochs` full-window Adam steps.
pub fn train_window(
    model: &Model,
    params: &mut ParamSet,
    state: &mut AdamState,
    designs: &[DayDesign],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    if params.shape != *model.shape() {
        return Err(EpfError::dim(model.shape().len(), params.values.len(), "parameter shape"));
    }
    let obj = WindowObjective {
        model,
        designs,
        kind: cfg.loss,
    };
    minimize(&obj, &mut params.values, state, cfg)
}

/// Writes a loss trace as `epoch,loss` CSV.
pub fn write_trace_csv<W: Write>(out: W, trace: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["epoch", "loss"])?;
    for (i, l) in trace.iter().enumerate() {
        w.write_record([(i + 1).to_string(), l.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
