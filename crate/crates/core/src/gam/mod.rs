//! Additive decomposable forecasting model.
//!
//! A forecast is the sum of a piecewise-linear trend (the *level*), a weekly
//! Fourier seasonality, a yearly Fourier seasonality and additive event
//! effects. Parameters are point estimates from a single penalized
//! least-squares solve.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::date::Day;

pub mod basis;
mod fit;
mod predict;
pub mod ses;
mod tune;

pub use fit::{build_design, fit, Design, DesignLayout};
pub use predict::{fitted_values, predict_decomposed};
pub use tune::{tune, tune_with, TuneReport};

/// Days of history required before a fit is attempted.
pub const MIN_HISTORY_DAYS: usize = 14;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),
    #[error("history has {len} days, at least {min} required")]
    HistoryTooShort { len: usize, min: usize },
    #[error("penalized least-squares system is singular or ill-conditioned (column {column})")]
    IllConditioned { column: usize },
    #[error("tuning grid is empty")]
    EmptyGrid,
    #[error("no spec in the tuning grid could be fitted")]
    NoViableSpec,
    #[error("could not read spec file: {0}")]
    Io(#[from] std::io::Error),
    #[error("could not parse spec file: {0}")]
    Toml(#[from] toml::de::Error),
}

/// Structure and regularization of the additive model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSpec {
    pub n_changepoints: usize,
    /// Fraction of the history, from its start, in which changepoints may sit.
    pub changepoint_range: f64,
    pub weekly_order: usize,
    pub yearly_order: usize,
    pub trend_penalty: f64,
    pub seasonal_penalty: f64,
    pub event_penalty: f64,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            n_changepoints: 25,
            changepoint_range: 0.8,
            weekly_order: 3,
            yearly_order: 10,
            trend_penalty: 10.0,
            seasonal_penalty: 1.0,
            event_penalty: 0.1,
        }
    }
}

impl ModelSpec {
    pub fn validate(&self) -> Result<(), ModelError> {
        let penalties = [
            ("trend_penalty", self.trend_penalty),
            ("seasonal_penalty", self.seasonal_penalty),
            ("event_penalty", self.event_penalty),
        ];
        for (name, p) in penalties {
            if !(p.is_finite() && p >= 0.0) {
                return Err(ModelError::InvalidSpec(format!("{name} must be >= 0, got {p}")));
            }
        }
        if self.weekly_order == 0 || self.yearly_order == 0 {
            return Err(ModelError::InvalidSpec("Fourier orders must be >= 1".into()));
        }
        if !(self.changepoint_range > 0.0 && self.changepoint_range <= 1.0) {
            return Err(ModelError::InvalidSpec(format!(
                "changepoint_range must be in (0, 1], got {}",
                self.changepoint_range
            )));
        }
        Ok(())
    }

    pub fn total_penalty(&self) -> f64 {
        self.trend_penalty + self.seasonal_penalty + self.event_penalty
    }

    pub fn from_toml_str(s: &str) -> Result<Self, ModelError> {
        let spec: ModelSpec = toml::from_str(s)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_toml_file(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }
}

/// A list of candidate specs, as read from a `[[spec]]` TOML array.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SpecGrid {
    #[serde(rename = "spec")]
    pub specs: Vec<ModelSpec>,
}

impl SpecGrid {
    pub fn from_toml_file(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let grid: SpecGrid = toml::from_str(&std::fs::read_to_string(path)?)?;
        for s in &grid.specs {
            s.validate()?;
        }
        Ok(grid)
    }
}

/// Summary of the in-sample fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub n_obs: usize,
    /// Residual sum of squares over the history.
    pub rss: f64,
    pub residual_sd: f64,
    /// Solution vector in design-column order (see [`DesignLayout`]).
    pub coefficients: Vec<f64>,
}

/// Point estimates of the additive model's parameters.
///
/// The level at day `d` is
/// `base_intercept + base_slope * (d - origin) + Σ slope_deltas[j] * max(0, d - changepoint_days[j])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub origin: Day,
    pub base_intercept: f64,
    /// Slope per day of the first trend segment.
    pub base_slope: f64,
    pub changepoint_days: Vec<Day>,
    /// Per-day slope change at each changepoint.
    pub slope_deltas: Vec<f64>,
    /// `[sin_1, cos_1, sin_2, cos_2, ...]` over the 7-day cycle.
    pub weekly_coeffs: Vec<f64>,
    /// `[sin_1, cos_1, ...]` over the day-of-year cycle.
    pub yearly_coeffs: Vec<f64>,
    pub event_effects: BTreeMap<String, f64>,
    pub diagnostics: Option<FitDiagnostics>,
}

impl FittedModel {
    pub fn level(&self, day: Day) -> f64 {
        let t = day.since(self.origin) as f64;
        let mut level = self.base_intercept + self.base_slope * t;
        for (cp, delta) in self.changepoint_days.iter().zip(&self.slope_deltas) {
            let past = day.since(*cp) as f64;
            if past > 0.0 {
                level += delta * past;
            }
        }
        level
    }

    /// Weekly effect, a function of the weekday alone.
    pub fn weekly_effect(&self, day: Day) -> f64 {
        basis::weekly_value(&self.weekly_coeffs, day.weekday())
    }

    /// Yearly effect, a function of the day of year alone.
    pub fn yearly_effect(&self, day: Day) -> f64 {
        basis::yearly_value(&self.yearly_coeffs, day.day_of_year())
    }

    /// Sum of the effects of `events`; events the model never saw contribute 0.
    pub fn event_effect<S: AsRef<str>>(&self, events: &[S]) -> f64 {
        events
            .iter()
            .map(|e| self.event_effects.get(e.as_ref()).copied().unwrap_or(0.0))
            .sum()
    }

    pub fn weekly_order(&self) -> usize {
        self.weekly_coeffs.len() / 2
    }

    pub fn yearly_order(&self) -> usize {
        self.yearly_coeffs.len() / 2
    }

    /// Weekly effect for each weekday, Monday first.
    pub fn weekly_profile(&self) -> [f64; 7] {
        std::array::from_fn(|dow| basis::weekly_value(&self.weekly_coeffs, dow))
    }
}

/// One date of a decomposed forecast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecomposedPoint {
    pub date: Day,
    pub level: f64,
    pub weekly: f64,
    pub yearly: f64,
    pub events: f64,
    pub total: f64,
}

/// Per-date components whose sum is the model's prediction.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DecomposedForecast {
    pub points: Vec<DecomposedPoint>,
}

impl DecomposedForecast {
    pub fn totals(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.total).collect()
    }

    pub fn dates(&self) -> impl Iterator<Item = Day> + '_ {
        self.points.iter().map(|p| p.date)
    }

    pub fn get(&self, date: Day) -> Option<&DecomposedPoint> {
        let first = self.points.first()?.date;
        let i = date.since(first);
        let p = self.points.get(usize::try_from(i).ok()?)?;
        (p.date == date).then_some(p)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Writes `date,level,weekly,yearly,events,total` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["date", "level", "weekly", "yearly", "events", "total"])?;
        for p in &self.points {
            wtr.write_record([
                p.date.to_string(),
                p.level.to_string(),
                p.weekly.to_string(),
                p.yearly.to_string(),
                p.events.to_string(),
                p.total.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_validation() {
        assert!(ModelSpec::default().validate().is_ok());
        let bad = ModelSpec {
            trend_penalty: -1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = ModelSpec {
            changepoint_range: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = ModelSpec {
            yearly_order: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn spec_from_toml_with_defaults() {
        let spec = ModelSpec::from_toml_str("trend_penalty = 0.5\nyearly_order = 4\n").unwrap();
        assert_eq!(spec.trend_penalty, 0.5);
        assert_eq!(spec.yearly_order, 4);
        assert_eq!(spec.n_changepoints, 25);
        assert!(ModelSpec::from_toml_str("bogus = 1").is_err());
    }

    #[test]
    fn level_is_piecewise_linear() {
        let model = FittedModel {
            origin: Day(0),
            base_intercept: 10.0,
            base_slope: 1.0,
            changepoint_days: vec![Day(5)],
            slope_deltas: vec![-2.0],
            weekly_coeffs: vec![0.0; 2],
            yearly_coeffs: vec![0.0; 2],
            event_effects: BTreeMap::new(),
            diagnostics: None,
        };
        assert_eq!(model.level(Day(5)), 15.0);
        assert_eq!(model.level(Day(7)), 13.0);
        assert_eq!(model.level(Day(10)), 10.0);
    }
}
