//! Day-ahead electricity price forecasting.
//!
//! Hybrid networks that add a per-hour linear skip path to a one-layer MLP,
//! trained with partial online learning and combined by Bernstein online
//! aggregation. Modules follow the pipeline order: [`marketdata`] ingests or
//! synthesizes hourly data, [`features`] builds the day designs, [`model`] and
//! [`training`] define and fit the networks, [`online`] runs rolling
//! backtests, [`tuner`] searches hyperparameters, [`ensemble`] combines
//! forecasts and [`evaluation`] scores them.

pub mod ensemble;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod marketdata;
pub mod model;
pub mod online;
pub mod registry;
pub mod seed;
pub mod training;
pub mod tuner;

pub use error::{EpfError, Result};
