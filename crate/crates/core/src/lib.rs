//! Forecasting support system core: data ingestion, the additive
//! decomposable model, judgmental adjustments and evaluation metrics.

pub mod adjust;
pub mod data;
pub mod date;
pub mod exec;
pub mod gam;
pub mod metrics;
pub mod synth;

pub use data::{EventCalendar, ForecastTask, TimeSeries};
pub use date::{Day, DayRange};
pub use exec::Execution;
pub use gam::{DecomposedForecast, FittedModel, ModelSpec};
