//! Adjustment and accuracy metrics, the accuracy bonus, balanced resampling
//! and per-treatment summary tables.

mod records;
mod resample;
mod summary;

pub use records::{read_results, write_results, ResultRecord};
pub use resample::{resample_balanced, resample_records};
pub use summary::{
    order_treatments, participant_counts, satisfaction_scale, summarize, summarize_treatment,
    survey_table, write_tables, Filters, ParticipantCounts, ProductSummary, Report, Stat,
    SurveyRow, TreatmentSummary, SURVEY_CATEGORIES,
};

use thiserror::Error;

/// Volumes at or below this count as "not adjusted" for the frequency.
pub const ADJUSTED_THRESHOLD: f64 = 1e-9;

/// Bonus per percentage point of improvement, in cents.
pub const CENTS_PER_POINT: f64 = 20.0;
pub const MAX_PRODUCT_BONUS_CENTS: u32 = 100;
pub const MAX_SESSION_BONUS_CENTS: u32 = 300;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("{metric} is undefined: {reason}")]
    Undefined { metric: &'static str, reason: String },
    #[error("series lengths differ: {0}")]
    LengthMismatch(String),
    #[error("empty input")]
    Empty,
    #[error("non-finite value at position {0}")]
    NonFinite(usize),
    #[error("survey item {item} is {value}, outside 1..=7")]
    ItemOutOfRange { item: usize, value: f64 },
    #[error("treatment {treatment} has no records for product {product}")]
    MissingProduct { treatment: String, product: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Model forecast, signed-off forecast and realized values over one horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastTriple {
    model: Vec<f64>,
    final_: Vec<f64>,
    truth: Vec<f64>,
}

impl ForecastTriple {
    pub fn new(model: Vec<f64>, final_: Vec<f64>, truth: Vec<f64>) -> Result<Self, MetricError> {
        if model.is_empty() {
            return Err(MetricError::Empty);
        }
        if model.len() != final_.len() || model.len() != truth.len() {
            return Err(MetricError::LengthMismatch(format!(
                "model {}, final {}, truth {}",
                model.len(),
                final_.len(),
                truth.len()
            )));
        }
        for (i, ((m, f), t)) in model.iter().zip(&final_).zip(&truth).enumerate() {
            if !(m.is_finite() && f.is_finite() && t.is_finite()) {
                return Err(MetricError::NonFinite(i));
            }
        }
        Ok(ForecastTriple { model, final_, truth })
    }

    pub fn model(&self) -> &[f64] {
        &self.model
    }

    pub fn final_values(&self) -> &[f64] {
        &self.final_
    }

    pub fn truth(&self) -> &[f64] {
        &self.truth
    }

    pub fn len(&self) -> usize {
        self.model.len()
    }

    pub fn is_empty(&self) -> bool {
        self.model.is_empty()
    }
}

fn abs_diff_sum(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Total absolute adjustment relative to the adjustment a perfect forecast
/// would have needed.
pub fn adjustment_volume(t: &ForecastTriple) -> Result<f64, MetricError> {
    let needed = abs_diff_sum(&t.model, &t.truth);
    if needed == 0.0 {
        return Err(MetricError::Undefined {
            metric: "adjustment volume",
            reason: "model forecast equals the truth".into(),
        });
    }
    Ok(abs_diff_sum(&t.model, &t.final_) / needed)
}

/// Share of volumes above [`ADJUSTED_THRESHOLD`].
pub fn adjustment_frequency(volumes: &[f64]) -> Result<f64, MetricError> {
    if volumes.is_empty() {
        return Err(MetricError::Empty);
    }
    let adjusted = volumes.iter().filter(|&&v| v > ADJUSTED_THRESHOLD).count();
    Ok(adjusted as f64 / volumes.len() as f64)
}

pub fn mae(forecast: &[f64], actual: &[f64]) -> Result<f64, MetricError> {
    if forecast.len() != actual.len() {
        return Err(MetricError::LengthMismatch(format!(
            "forecast {}, actual {}",
            forecast.len(),
            actual.len()
        )));
    }
    if forecast.is_empty() {
        return Err(MetricError::Empty);
    }
    Ok(abs_diff_sum(forecast, actual) / forecast.len() as f64)
}

/// Ratio of two forecasts' mean absolute errors against the same actuals.
pub fn relative_mae(forecast: &[f64], reference: &[f64], actual: &[f64]) -> Result<f64, MetricError> {
    let num = mae(forecast, actual)?;
    let den = mae(reference, actual)?;
    if den == 0.0 {
        return Err(MetricError::Undefined {
            metric: "rMAE",
            reason: "reference forecast has zero error".into(),
        });
    }
    Ok(num / den)
}

/// MAE of the final forecast over MAE of the model forecast.
pub fn rmae(t: &ForecastTriple) -> Result<f64, MetricError> {
    relative_mae(&t.final_, &t.model, &t.truth)
}

/// Mean absolute percentage error with zero-actual days left out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mape {
    pub value: f64,
    /// Days skipped because the actual was zero.
    pub excluded: usize,
}

pub fn mape(actual: &[f64], forecast: &[f64]) -> Result<Mape, MetricError> {
    if actual.len() != forecast.len() {
        return Err(MetricError::LengthMismatch(format!(
            "actual {}, forecast {}",
            actual.len(),
            forecast.len()
        )));
    }
    let mut sum = 0.0;
    let mut used = 0usize;
    for (a, f) in actual.iter().zip(forecast) {
        if *a != 0.0 {
            sum += ((a - f) / a).abs();
            used += 1;
        }
    }
    if used == 0 {
        return Err(MetricError::Undefined {
            metric: "MAPE",
            reason: "all actuals are zero".into(),
        });
    }
    Ok(Mape {
        value: sum / used as f64,
        excluded: actual.len() - used,
    })
}

/// Bonus for one product in cents: 20 cents per percentage point of rMAE
/// improvement, rounded half-up, capped at one dollar.
pub fn bonus_cents(rmae: f64) -> u32 {
    if !rmae.is_finite() || rmae >= 1.0 {
        return 0;
    }
    let raw = CENTS_PER_POINT * (1.0 - rmae) * 100.0;
    // The epsilon keeps values like 59.99999999999999 from rounding down.
    let cents = (raw + 0.5 + 1e-9).floor();
    cents.min(MAX_PRODUCT_BONUS_CENTS as f64) as u32
}

/// Session bonus: sum of per-product bonuses, capped at three dollars.
pub fn session_bonus_cents(rmaes: &[f64]) -> u32 {
    rmaes
        .iter()
        .map(|&r| bonus_cents(r))
        .sum::<u32>()
        .min(MAX_SESSION_BONUS_CENTS)
}

/// Formats cents as a dollar amount, e.g. `60` as `"0.60"`.
pub fn format_cents(cents: u32) -> String {
    format!("{}.{:02}", cents / 100, cents % 100)
}
