//! Multi-output quantile forecasting of photovoltaic generation.
//!
//! The crate covers the full desk: domain types on a 15-minute grid, the
//! pinball loss family, proper scoring rules (energy-form CRPS, interval
//! score), four neural quantile forecasters plus gradient-boosted trees, a
//! data pipeline with a synthetic plant generator, and a k-fold evaluation
//! harness that reproduces the forecasting protocol end to end.

pub mod checkpoint;
pub mod evaluate;
pub mod gbr;
pub mod loss;
pub mod metrics;
pub mod neural;
pub mod pipeline;
pub mod report;
pub mod types;

pub use types::{
    CoreError, Gate, GateSchedule, PredictionInterval, PvSeries, QuantileLevels, QuantileMatrix,
    WeatherForecastSet, DEFAULT_CAPACITY_KW, PAST_PV_STEPS, STEPS_PER_DAY, STEP_MINUTES,
};

// Downstream crates exchange arrays with this API; re-export the crate so
// they stay on the exact same version.
pub use ndarray;
