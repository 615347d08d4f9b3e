//! Request and response bodies of the HTTP interface.

use fss_core::adjust::{AdjustmentState, ComponentKind, DatedValue, Edit, ResidualPoint, YearlyPoint};
use fss_core::gam::DecomposedPoint;
use serde::{Deserialize, Serialize};

use crate::session::Stage;
use crate::treatment::Treatment;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateSessionRequest {
    pub worker_id: String,
    #[serde(default)]
    pub treatment: Option<Treatment>,
    #[serde(default)]
    pub at_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: String,
    pub treatment: Treatment,
    pub products: Vec<String>,
    /// True when an open session of the same worker was returned.
    pub resumed: bool,
    pub duplicate: bool,
    pub stage: Stage,
}

/// Read-only model decomposition shown in the transparent designs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub fitted: Vec<DecomposedPoint>,
    pub forecast: Vec<DecomposedPoint>,
    /// Weekly effect per weekday, Monday first.
    pub weekly_profile: [f64; 7],
    pub yearly_curve: Vec<YearlyPoint>,
}

/// Edit support in the adjustable design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adjustable {
    pub overrides: AdjustmentState,
    pub overridden: Vec<ComponentKind>,
    pub weeks_shown: usize,
    pub max_weeks_shown: usize,
    pub weekly_residuals: Vec<ResidualPoint>,
    /// Absent when the history is shorter than a year.
    pub yearly_residuals: Option<Vec<ResidualPoint>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewPayload {
    pub session_id: String,
    pub treatment: Treatment,
    pub product_index: usize,
    pub product_count: usize,
    pub product_id: String,
    pub function_label: String,
    pub editable: Vec<ComponentKind>,
    pub min_view_seconds: f64,
    pub history: Vec<DatedValue>,
    /// In-sample model totals.
    pub fitted: Vec<DatedValue>,
    /// Unadjusted model totals over the horizon.
    pub model_forecast: Vec<DatedValue>,
    /// Current forecast with all adjustments applied.
    pub forecast: Vec<DatedValue>,
    pub value_overrides: Vec<DatedValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decomposition: Option<Decomposition>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adjustable: Option<Adjustable>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjustmentRequest {
    pub edit: Edit,
    #[serde(default)]
    pub at_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjustmentResponse {
    pub product_index: usize,
    pub forecast: Vec<DatedValue>,
    pub value_overrides: Vec<DatedValue>,
    pub overridden: Vec<ComponentKind>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TimedRequest {
    #[serde(default)]
    pub at_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignOffResponse {
    pub signed_off: usize,
    pub next: Stage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyRequest {
    pub scores: [f64; 5],
    #[serde(default)]
    pub comment: String,
    #[serde(default)]
    pub at_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductAccuracy {
    pub product_id: String,
    /// Undefined when the model forecast was exact.
    pub rmae: Option<f64>,
    pub bonus_cents: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Receipt {
    pub session_id: String,
    pub secret_key: String,
    pub products: Vec<ProductAccuracy>,
    pub bonus_cents: u32,
    /// Dollar amount, e.g. `"1.80"`.
    pub bonus: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub duplicate: bool,
}
