//! Judgmental bias policies and the forecasts they produce.

use fss_core::gam::DecomposedPoint;
use serde::{Deserialize, Serialize};

use crate::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum JudgePolicy {
    /// Signs off the model forecast untouched.
    Noop,
    /// Pulls every value towards the last observation.
    AnchorAdjust { alpha: f64 },
    /// Shifts the forecast by the recent mean residual.
    NoiseModel { window: usize, gain: f64 },
    /// Flattens the level trend over the horizon.
    TrendDampen { factor: f64 },
    /// Exaggerates deviations from the horizon mean.
    Extreme { gain: f64 },
}

impl JudgePolicy {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Config(m));
        match *self {
            JudgePolicy::Noop => Ok(()),
            JudgePolicy::AnchorAdjust { alpha } if !(0.0..=1.0).contains(&alpha) => {
                bad(format!("anchor_adjust alpha {alpha} outside [0, 1]"))
            }
            JudgePolicy::TrendDampen { factor } if !(0.0..=1.0).contains(&factor) => {
                bad(format!("trend_dampen factor {factor} outside [0, 1]"))
            }
            JudgePolicy::NoiseModel { window: 0, .. } => bad("noise_model window must be at least 1".into()),
            JudgePolicy::NoiseModel { gain, .. } | JudgePolicy::Extreme { gain } if !(gain >= 0.0 && gain.is_finite()) => {
                bad(format!("gain {gain} must be finite and non-negative"))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            JudgePolicy::Noop => "noop",
            JudgePolicy::AnchorAdjust { .. } => "anchor_adjust",
            JudgePolicy::NoiseModel { .. } => "noise_model",
            JudgePolicy::TrendDampen { .. } => "trend_dampen",
            JudgePolicy::Extreme { .. } => "extreme",
        }
    }
}

/// `alpha * model + (1 - alpha) * last_obs` per date.
pub fn anchor_adjust_forecast(model: &[f64], last_obs: f64, alpha: f64) -> Vec<f64> {
    model.iter().map(|m| alpha * m + (1.0 - alpha) * last_obs).collect()
}

/// Scales the level's drift from the first horizon day by `factor` and
/// re-adds the other components.
pub fn trend_dampen_forecast(forecast: &[DecomposedPoint], factor: f64) -> Vec<f64> {
    let Some(first) = forecast.first() else {
        return Vec::new();
    };
    forecast
        .iter()
        .map(|p| p.total - (1.0 - factor) * (p.level - first.level))
        .collect()
}

/// Dampened level values, for agents that redraw the level directly.
pub fn dampened_level(forecast: &[DecomposedPoint], factor: f64) -> Vec<f64> {
    let Some(first) = forecast.first() else {
        return Vec::new();
    };
    forecast
        .iter()
        .map(|p| p.level - (1.0 - factor) * (p.level - first.level))
        .collect()
}

/// Trend dampening without a decomposition: the slope of a least-squares
/// line through the totals stands in for the level drift.
pub fn trend_dampen_totals(model: &[f64], factor: f64) -> Vec<f64> {
    let n = model.len();
    if n < 2 {
        return model.to_vec();
    }
    let tbar = (n - 1) as f64 / 2.0;
    let ybar = model.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in model.iter().enumerate() {
        let dt = i as f64 - tbar;
        sxy += dt * (y - ybar);
        sxx += dt * dt;
    }
    let slope = sxy / sxx;
    model
        .iter()
        .enumerate()
        .map(|(i, m)| m - (1.0 - factor) * slope * i as f64)
        .collect()
}

/// Mean of `actual - fitted` over the last `window` days.
pub fn recent_residual(actual: &[f64], fitted: &[f64], window: usize) -> f64 {
    let n = actual.len().min(fitted.len());
    let w = window.min(n);
    if w == 0 {
        return 0.0;
    }
    let sum: f64 = (n - w..n).map(|i| actual[i] - fitted[i]).sum();
    sum / w as f64
}

/// Adds `gain` times the recent mean residual to every value.
pub fn noise_model_forecast(model: &[f64], actual: &[f64], fitted: &[f64], window: usize, gain: f64) -> Vec<f64> {
    let shift = gain * recent_residual(actual, fitted, window);
    model.iter().map(|m| m + shift).collect()
}

/// `model + gain * (model - mean(model))`.
pub fn extreme_forecast(model: &[f64], gain: f64) -> Vec<f64> {
    if model.is_empty() {
        return Vec::new();
    }
    let mean = model.iter().sum::<f64>() / model.len() as f64;
    model.iter().map(|m| m + gain * (m - mean)).collect()
}
