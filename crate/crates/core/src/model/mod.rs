//! Network family: pure linear models (reduced or full regressors), the
//! plain one-hidden-layer MLP, and hybrids that add the MLP to a linear skip
//! connection.
//!
//! A model's prediction for hour `h` is
//!
//! ```text
//! skip_bias[h] + B[h] . x_skip(h)  +  W2[h] . leaky_relu(W1 x + b1) + b2[h]
//! ```
//!
//! where either term may be absent depending on the [`Architecture`]. The MLP
//! input `x` is always the full standardized design vector.

mod arch;
mod init;
mod io;

pub use arch::{
    architectures, default_architectures, Architecture, ArchitectureRegistry, FullLinear, Mlp,
    MlpFullLinear, MlpReducedLinear, MlpReducedLinearOls, ReducedLinear, ReducedLinearOls,
    SkipInput, ARCHITECTURE_NAMES,
};
pub use init::{init_ols, init_random, OLS_JITTER};
pub use io::{read_params, write_params};

use std::ops::Range;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{EpfError, Result};
use crate::features::{DayDesign, FeatureLayout};
use crate::marketdata::{DayHours, HOURS};

pub const DEFAULT_LEAK: f64 = 0.01;

pub fn leaky_relu(z: f64, alpha: f64) -> f64 {
    if z >= 0.0 {
        z
    } else {
        alpha * z
    }
}

/// Derivative of [`leaky_relu`], taking the `z >= 0` branch at zero.
pub fn leaky_relu_grad(z: f64, alpha: f64) -> f64 {
    if z >= 0.0 {
        1.0
    } else {
        alpha
    }
}

/// Architecture choice and hyperparameters of one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub architecture: String,
    #[serde(default)]
    pub hidden_n: usize,
    #[serde(default = "default_leak")]
    pub leak_alpha: f64,
    #[serde(default)]
    pub lambda1: f64,
    #[serde(default)]
    pub lambda2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ols_share_alpha: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

fn default_leak() -> f64 {
    DEFAULT_LEAK
}

impl ModelSpec {
    pub fn new(architecture: &str) -> Self {
        Self {
            architecture: architecture.to_string(),
            hidden_n: 0,
            leak_alpha: DEFAULT_LEAK,
            lambda1: 0.0,
            lambda2: 0.0,
            ols_share_alpha: None,
            seed: 0,
        }
    }

    pub fn hidden(mut self, n: usize) -> Self {
        self.hidden_n = n;
        self
    }

    pub fn penalties(mut self, lambda1: f64, lambda2: f64) -> Self {
        self.lambda1 = lambda1;
        self.lambda2 = lambda2;
        self
    }

    pub fn ols_share(mut self, alpha: f64) -> Self {
        self.ols_share_alpha = Some(alpha);
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Dimensions of a parameter vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamShape {
    /// Skip-connection width per hour; empty when there is no skip path.
    pub skip_widths: Vec<usize>,
    pub input_dim: usize,
    pub hidden_n: usize,
}

/// Index ranges of each parameter block inside the flat vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamOffsets {
    pub skip_weights: Range<usize>,
    pub skip_bias: Range<usize>,
    pub w1: Range<usize>,
    pub b1: Range<usize>,
    pub w2: Range<usize>,
    pub b2: Range<usize>,
    /// Start of each hour's skip weights, relative to `skip_weights.start`.
    pub skip_row_start: Vec<usize>,
}

impl ParamShape {
    pub fn has_skip(&self) -> bool {
        !self.skip_widths.is_empty()
    }

    pub fn offsets(&self) -> ParamOffsets {
        let mut skip_row_start = Vec::with_capacity(self.skip_widths.len());
        let mut acc = 0;
        for w in &self.skip_widths {
            skip_row_start.push(acc);
            acc += w;
        }
        let skip_weights = 0..acc;
        let nb = if self.has_skip() { HOURS } else { 0 };
        let skip_bias = acc..acc + nb;
        let h = self.hidden_n;
        let w1 = skip_bias.end..skip_bias.end + h * self.input_dim;
        let b1 = w1.end..w1.end + h;
        let w2 = b1.end..b1.end + HOURS * h;
        let b2 = w2.end..w2.end + if h > 0 { HOURS } else { 0 };
        ParamOffsets {
            skip_weights,
            skip_bias,
            w1,
            b1,
            w2,
            b2,
            skip_row_start,
        }
    }

    pub fn len(&self) -> usize {
        self.offsets().b2.end
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// All trainable weights of one model, stored flat.
///
/// Block order: skip weights (hour-major), skip biases, `W1` (row-major,
/// `hidden_n x input_dim`), `b1`, `W2` (row-major, `24 x hidden_n`), `b2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    pub shape: ParamShape,
    pub values: Vec<f64>,
}

impl ParamSet {
    pub fn zeros(shape: ParamShape) -> Self {
        let n = shape.len();
        Self {
            shape,
            values: vec![0.0; n],
        }
    }

    pub fn offsets(&self) -> ParamOffsets {
        self.shape.offsets()
    }

    pub fn skip_weights(&self, hour: usize) -> &[f64] {
        let o = self.offsets();
        let start = o.skip_weights.start + o.skip_row_start[hour];
        &self.values[start..start + self.shape.skip_widths[hour]]
    }

    pub fn skip_weights_mut(&mut self, hour: usize) -> &mut [f64] {
        let o = self.offsets();
        let start = o.skip_weights.start + o.skip_row_start[hour];
        let w = self.shape.skip_widths[hour];
        &mut self.values[start..start + w]
    }

    pub fn block(&self, range: Range<usize>) -> &[f64] {
        &self.values[range]
    }

    pub fn block_mut(&mut self, range: Range<usize>) -> &mut [f64] {
        &mut self.values[range]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Euclidean norm over all entries.
    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Sets every MLP weight and bias to zero, leaving the skip path intact.
    pub fn zero_hidden(&mut self) {
        let o = self.offsets();
        self.values[o.w1.start..o.b2.end].fill(0.0);
    }
}

/// A resolved model: spec plus the architecture strategy and the feature
/// layout it reads.
#[derive(Clone)]
pub struct Model {
    pub spec: ModelSpec,
    pub layout: FeatureLayout,
    arch: Arc<dyn Architecture>,
    shape: ParamShape,
}

impl std::fmt::Debug for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Model")
            .field("spec", &self.spec)
            .field("architecture", &self.arch.name())
            .finish()
    }
}

impl Model {
    /// Resolves `spec.architecture` in the built-in registry.
    pub fn new(spec: ModelSpec, layout: &FeatureLayout) -> Result<Self> {
        Self::with_registry(spec, layout, architectures())
    }

    pub fn with_registry(spec: ModelSpec, layout: &FeatureLayout, registry: &ArchitectureRegistry) -> Result<Self> {
        let arch = registry.get(&spec.architecture)?;
        if arch.has_hidden_layer() != (spec.hidden_n > 0) {
            return Err(EpfError::InvalidArgument(format!(
                "{}: hidden_n must be {} for this architecture, got {}",
                arch.name(),
                if arch.has_hidden_layer() { "> 0" } else { "0" },
                spec.hidden_n
            )));
        }
        if arch.uses_ols_init() != spec.ols_share_alpha.is_some() {
            return Err(EpfError::InvalidArgument(format!(
                "{}: ols_share_alpha must be {}",
                arch.name(),
                if arch.uses_ols_init() { "set" } else { "absent" }
            )));
        }
        for (name, v) in [("lambda1", spec.lambda1), ("lambda2", spec.lambda2)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(EpfError::InvalidArgument(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        let skip_widths = match arch.skip_input() {
            SkipInput::None => Vec::new(),
            SkipInput::Reduced => layout.reduced_widths(),
            SkipInput::Full => vec![layout.full_width(); HOURS],
        };
        let shape = ParamShape {
            skip_widths,
            input_dim: layout.full_width(),
            hidden_n: spec.hidden_n,
        };
        Ok(Self {
            spec,
            layout: layout.clone(),
            arch,
            shape,
        })
    }

    pub fn architecture(&self) -> &dyn Architecture {
        self.arch.as_ref()
    }

    pub fn skip_input(&self) -> SkipInput {
        self.arch.skip_input()
    }

    pub fn shape(&self) -> &ParamShape {
        &self.shape
    }

    /// Initial parameters chosen by the architecture (random or OLS-based).
    /// `train` must be standardized.
    pub fn init_params(&self, train: &[DayDesign]) -> Result<ParamSet> {
        self.arch.initialize(self, train)
    }

    pub fn check(&self, params: &ParamSet, design: &DayDesign) -> Result<()> {
        if params.shape != self.shape {
            return Err(EpfError::dim(self.shape.len(), params.values.len(), "parameter shape"));
        }
        if design.full_x.len() != self.shape.input_dim {
            return Err(EpfError::dim(self.shape.input_dim, design.full_x.len(), "design width"));
        }
        if self.skip_input() == SkipInput::Reduced {
            for (h, x) in design.reduced_x.iter().enumerate() {
                if x.len() != self.shape.skip_widths[h] {
                    return Err(EpfError::dim(self.shape.skip_widths[h], x.len(), "reduced width"));
                }
            }
        }
        Ok(())
    }

    /// Skip-path input of hour `h`.
    pub fn skip_x<'a>(&self, design: &'a DayDesign, hour: usize) -> &'a [f64] {
        match self.skip_input() {
            SkipInput::Reduced => &design.reduced_x[hour],
            _ => &design.full_x,
        }
    }

    /// 24 hourly price predictions for one standardized design.
    pub fn forward(&self, params: &ParamSet, design: &DayDesign) -> Result<DayHours> {
        self.check(params, design)?;
        let o = params.offsets();
        let mut out = [0.0; HOURS];
        if self.shape.has_skip() {
            let bias = &params.values[o.skip_bias.clone()];
            for (h, y) in out.iter_mut().enumerate() {
                *y = bias[h] + dot(params.skip_weights(h), self.skip_x(design, h));
            }
        }
        let n = self.shape.hidden_n;
        if n > 0 {
            let act = self.hidden_activations(params, &design.full_x);
            let w2 = &params.values[o.w2];
            let b2 = &params.values[o.b2];
            for (h, y) in out.iter_mut().enumerate() {
                *y += b2[h] + dot(&w2[h * n..(h + 1) * n], &act);
            }
        }
        Ok(out)
    }

    /// Leaky-ReLU outputs of the hidden layer.
    pub fn hidden_activations(&self, params: &ParamSet, x: &[f64]) -> Vec<f64> {
        let o = params.offsets();
        let d = self.shape.input_dim;
        let w1 = &params.values[o.w1];
        let b1 = &params.values[o.b1];
        (0..self.shape.hidden_n)
            .map(|j| leaky_relu(b1[j] + dot(&w1[j * d..(j + 1) * d], x), self.spec.leak_alpha))
            .collect()
    }
}

/// Free-function form of [`Model::forward`].
pub fn forward(model: &Model, params: &ParamSet, design: &DayDesign) -> Result<DayHours> {
    model.forward(params, design)
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
