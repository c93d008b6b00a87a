use std::sync::{Arc, OnceLock};

use crate::error::Result;
use crate::features::DayDesign;
use crate::model::{init_ols, init_random, Model, ParamSet};
use crate::registry::Registry;

/// Which regressors feed the linear skip connection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkipInput {
    None,
    /// Per-hour reduced vector (15 or 14 entries with offshore wind).
    Reduced,
    /// Shared full vector.
    Full,
}

/// One member of the network family.
///
/// Architectures are stateless strategies: they describe the wiring and how
/// to initialize weights. Training and prediction are shared code driven by
/// these answers.
pub trait Architecture: Send + Sync {
    /// Registry key, e.g. `"MLPReducedLinear"`.
    fn name(&self) -> &'static str;

    /// Human-readable label used in reports.
    fn display_name(&self) -> &'static str;

    fn skip_input(&self) -> SkipInput;

    fn has_hidden_layer(&self) -> bool;

    fn uses_ols_init(&self) -> bool {
        false
    }

    /// Initial weights. `train` is the standardized initial window.
    fn initialize(&self, model: &Model, _train: &[DayDesign]) -> Result<ParamSet> {
        Ok(init_random(model))
    }
}

pub type ArchitectureRegistry = Registry<dyn Architecture>;

macro_rules! architecture {
    ($ty:ident, $name:literal, $display:literal, $skip:expr, $hidden:expr) => {
        #[derive(Debug, Clone, Copy, Default)]
        pub struct $ty;

        impl Architecture for $ty {
            fn name(&self) -> &'static str {
                $name
            }
            fn display_name(&self) -> &'static str {
                $display
            }
            fn skip_input(&self) -> SkipInput {
                $skip
            }
            fn has_hidden_layer(&self) -> bool {
                $hidden
            }
        }
    };
}

architecture!(ReducedLinear, "ReducedLinear", "Reduced Linear", SkipInput::Reduced, false);
architecture!(FullLinear, "FullLinear", "Full Linear", SkipInput::Full, false);
architecture!(Mlp, "MLP", "MLP", SkipInput::None, true);
architecture!(MlpReducedLinear, "MLPReducedLinear", "MLP with Reduced Linear", SkipInput::Reduced, true);
architecture!(MlpFullLinear, "MLPFullLinear", "MLP with Full Linear", SkipInput::Full, true);

/// Reduced linear network whose skip weights start from a scaled OLS fit.
#[derive(Debug, Clone, Copy, Default)]
pub struct ReducedLinearOls;

impl Architecture for ReducedLinearOls {
    fn name(&self) -> &'static str {
        "ReducedLinearOLS"
    }
    fn display_name(&self) -> &'static str {
        "Reduced Linear with OLS"
    }
    fn skip_input(&self) -> SkipInput {
        SkipInput::Reduced
    }
    fn has_hidden_layer(&self) -> bool {
        false
    }
    fn uses_ols_init(&self) -> bool {
        true
    }
    fn initialize(&self, model: &Model, train: &[DayDesign]) -> Result<ParamSet> {
        init_ols(model, train)
    }
}

/// Hybrid with reduced skip path; OLS-initialized skip, random MLP.
#[derive(Debug, Clone, Copy, Default)]
pub struct MlpReducedLinearOls;

impl Architecture for MlpReducedLinearOls {
    fn name(&self) -> &'static str {
        "MLPReducedLinearOLS"
    }
    fn display_name(&self) -> &'static str {
        "MLP with Reduced Linear and OLS"
    }
    fn skip_input(&self) -> SkipInput {
        SkipInput::Reduced
    }
    fn has_hidden_layer(&self) -> bool {
        true
    }
    fn uses_ols_init(&self) -> bool {
        true
    }
    fn initialize(&self, model: &Model, train: &[DayDesign]) -> Result<ParamSet> {
        init_ols(model, train)
    }
}

/// Registry keys of the seven built-in architectures.
pub const ARCHITECTURE_NAMES: [&str; 7] = [
    "ReducedLinear",
    "FullLinear",
    "MLP",
    "MLPReducedLinear",
    "MLPFullLinear",
    "ReducedLinearOLS",
    "MLPReducedLinearOLS",
];

pub fn default_architectures() -> ArchitectureRegistry {
    let mut reg = ArchitectureRegistry::new("architecture");
    let all: [Arc<dyn Architecture>; 7] = [
        Arc::new(ReducedLinear),
        Arc::new(FullLinear),
        Arc::new(Mlp),
        Arc::new(MlpReducedLinear),
        Arc::new(MlpFullLinear),
        Arc::new(ReducedLinearOls),
        Arc::new(MlpReducedLinearOls),
    ];
    for a in all {
        reg.register(a.name(), a);
    }
    reg
}

/// Process-wide registry holding the built-in architectures.
pub fn architectures() -> &'static ArchitectureRegistry {
    static REG: OnceLock<ArchitectureRegistry> = OnceLock::new();
    REG.get_or_init(default_architectures)
}
