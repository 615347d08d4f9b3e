//! Judgmental adjustments to a decomposed forecast.
//!
//! An [`AdjustmentState`] holds optional overrides of the level, weekly and
//! yearly components plus pinned values on individual forecast dates.
//! [`compose_final`] recombines them with the model's components. States are
//! plain values: every edit returns a new state.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::date::{Day, DayRange};
use crate::gam::basis::{self, yearly_phase};
use crate::gam::DecomposedForecast;

mod residuals;

pub use residuals::{weekly_residual_view, yearly_residual_view, ResidualPoint};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AdjustError {
    #[error("edit contains a non-finite value")]
    NonFinite,
    #[error("weekly edit needs exactly 7 handles, got {0}")]
    WrongHandleCount(usize),
    #[error("redraw needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("redraw points must be strictly increasing")]
    NotIncreasing,
    #[error("day of year {0} outside 1..=366")]
    DayOfYearOutOfRange(u16),
    #[error("level redraw {first}..{last} does not reach the forecast horizon")]
    NoHorizonOverlap { first: Day, last: Day },
    #[error("{0} is not a forecast date")]
    OutsideHorizon(Day),
    #[error("residual view needs at least {needed} days of history, got {got}")]
    HistoryTooShort { needed: usize, got: usize },
    #[error("residual view must show at least one point")]
    NothingToShow,
}

/// Which part of an adjustment a reset applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComponentKind {
    Level,
    Weekly,
    Yearly,
    Values,
}

impl ComponentKind {
    /// True for the decomposition components (everything but single values).
    pub fn is_component(self) -> bool {
        !matches!(self, ComponentKind::Values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatedValue {
    pub date: Day,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YearlyPoint {
    pub day_of_year: u16,
    pub value: f64,
}

/// A redrawn level, stored as one value per day of the drawn range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelOverride {
    pub polyline: Vec<DatedValue>,
    pub start: Day,
    pub daily: Vec<f64>,
}

impl LevelOverride {
    pub fn range(&self) -> DayRange {
        DayRange::new(self.start, self.daily.len())
    }

    pub fn at(&self, date: Day) -> Option<f64> {
        self.range().index_of(date).map(|i| self.daily[i])
    }
}

/// A redrawn yearly pattern, re-projected onto an offset plus Fourier series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearlyOverride {
    pub polyline: Vec<YearlyPoint>,
    pub offset: f64,
    pub coeffs: Vec<f64>,
}

impl YearlyOverride {
    pub fn at(&self, day_of_year: u16) -> f64 {
        self.offset + basis::yearly_value(&self.coeffs, day_of_year)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AdjustmentState {
    pub level: Option<LevelOverride>,
    /// Absolute weekly effects, Monday first.
    pub weekly: Option<[f64; 7]>,
    pub yearly: Option<YearlyOverride>,
    pub values: BTreeMap<Day, f64>,
}

impl AdjustmentState {
    pub fn is_empty(&self) -> bool {
        self.level.is_none() && self.weekly.is_none() && self.yearly.is_none() && self.values.is_empty()
    }

    pub fn has_component_overrides(&self) -> bool {
        self.level.is_some() || self.weekly.is_some() || self.yearly.is_some()
    }
}

/// What the edit operations need to know about the forecast being edited.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EditContext {
    pub horizon: DayRange,
    /// Fourier order used when re-projecting a yearly redraw.
    pub yearly_order: usize,
}

/// One user edit, serialized as a single-key JSON object:
/// `{"level": [...]}`, `{"weekly": [...]}`, `{"yearly": [...]}`,
/// `{"values": [...]}`, `{"reset": "weekly"}` or `{"reset_all": true}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Edit {
    Level(Vec<DatedValue>),
    Weekly(Vec<f64>),
    Yearly(Vec<YearlyPoint>),
    Values(Vec<DatedValue>),
    Reset(ComponentKind),
    ResetAll(bool),
}

impl Edit {
    /// The component this edit touches; `None` for a full reset.
    pub fn kind(&self) -> Option<ComponentKind> {
        match self {
            Edit::Level(_) => Some(ComponentKind::Level),
            Edit::Weekly(_) => Some(ComponentKind::Weekly),
            Edit::Yearly(_) => Some(ComponentKind::Yearly),
            Edit::Values(_) => Some(ComponentKind::Values),
            Edit::Reset(k) => Some(*k),
            Edit::ResetAll(_) => None,
        }
    }
}

fn check_finite(values: impl IntoIterator<Item = f64>) -> Result<(), AdjustError> {
    if values.into_iter().all(f64::is_finite) {
        Ok(())
    } else {
        Err(AdjustError::NonFinite)
    }
}

/// Replaces the weekly effects with the 7 handle positions (Monday first).
pub fn apply_weekly_edit(state: &AdjustmentState, handles: &[f64]) -> Result<AdjustmentState, AdjustError> {
    let handles: [f64; 7] = handles
        .try_into()
        .map_err(|_| AdjustError::WrongHandleCount(handles.len()))?;
    check_finite(handles)?;
    Ok(AdjustmentState {
        weekly: Some(handles),
        ..state.clone()
    })
}

/// Value of a periodic polyline at `phase`, interpolating linearly and
/// wrapping from the last point back to the first.
fn periodic_interpolate(knots: &[(f64, f64)], phase: f64) -> f64 {
    let n = knots.len();
    let (first, last) = (knots[0], knots[n - 1]);
    let mut x = phase;
    if x < first.0 {
        x += 1.0;
    }
    if x >= last.0 {
        let span = first.0 + 1.0 - last.0;
        let w = if span > 0.0 { (x - last.0) / span } else { 0.0 };
        return last.1 + w * (first.1 - last.1);
    }
    let i = knots.partition_point(|k| k.0 <= x) - 1;
    let (a, b) = (knots[i], knots[i + 1]);
    a.1 + (x - a.0) / (b.0 - a.0) * (b.1 - a.1)
}

/// Replaces the yearly effect with a redrawn curve.
///
/// The polyline is interpolated linearly (wrapping at the year boundary),
/// sampled on every day of the year and re-fitted as an offset plus a
/// Fourier series of `yearly_order`.
pub fn apply_yearly_redraw(
    state: &AdjustmentState,
    polyline: &[YearlyPoint],
    yearly_order: usize,
) -> Result<AdjustmentState, AdjustError> {
    if polyline.len() < 2 {
        return Err(AdjustError::TooFewPoints(polyline.len()));
    }
    check_finite(polyline.iter().map(|p| p.value))?;
    if let Some(p) = polyline.iter().find(|p| !(1..=366).contains(&p.day_of_year)) {
        return Err(AdjustError::DayOfYearOutOfRange(p.day_of_year));
    }
    if polyline.windows(2).any(|w| w[1].day_of_year <= w[0].day_of_year) {
        return Err(AdjustError::NotIncreasing);
    }
    let knots: Vec<(f64, f64)> = polyline
        .iter()
        .map(|p| (yearly_phase(p.day_of_year), p.value))
        .collect();
    let phases: Vec<f64> = (1..=366).map(yearly_phase).collect();
    let samples: Vec<f64> = phases.iter().map(|&x| periodic_interpolate(&knots, x)).collect();
    let (offset, coeffs) = basis::fit_fourier(&phases, &samples, yearly_order, true);
    Ok(AdjustmentState {
        yearly: Some(YearlyOverride {
            polyline: polyline.to_vec(),
            offset,
            coeffs,
        }),
        ..state.clone()
    })
}

/// Replaces the level over the drawn range with the daily interpolation of
/// the polyline. Days outside the range keep the model level.
pub fn apply_level_redraw(
    state: &AdjustmentState,
    polyline: &[DatedValue],
    horizon: DayRange,
) -> Result<AdjustmentState, AdjustError> {
    if polyline.len() < 2 {
        return Err(AdjustError::TooFewPoints(polyline.len()));
    }
    check_finite(polyline.iter().map(|p| p.value))?;
    if polyline.windows(2).any(|w| w[1].date <= w[0].date) {
        return Err(AdjustError::NotIncreasing);
    }
    let (first, last) = (polyline[0].date, polyline[polyline.len() - 1].date);
    if last < horizon.start || first > horizon.end() {
        return Err(AdjustError::NoHorizonOverlap { first, last });
    }
    let mut daily = Vec::with_capacity(last.since(first) as usize + 1);
    for seg in polyline.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let len = b.date.since(a.date);
        for k in 0..len {
            daily.push(a.value + (b.value - a.value) * k as f64 / len as f64);
        }
    }
    daily.push(polyline[polyline.len() - 1].value);
    Ok(AdjustmentState {
        level: Some(LevelOverride {
            polyline: polyline.to_vec(),
            start: first,
            daily,
        }),
        ..state.clone()
    })
}

/// Pins the final forecast on `date` to `value`.
pub fn apply_value_edit(
    state: &AdjustmentState,
    date: Day,
    value: f64,
    horizon: DayRange,
) -> Result<AdjustmentState, AdjustError> {
    if !horizon.contains(date) {
        return Err(AdjustError::OutsideHorizon(date));
    }
    check_finite([value])?;
    let mut next = state.clone();
    next.values.insert(date, value);
    Ok(next)
}

/// Clears one override; `Values` clears every pinned value.
pub fn reset_component(state: &AdjustmentState, kind: ComponentKind) -> AdjustmentState {
    let mut next = state.clone();
    match kind {
        ComponentKind::Level => next.level = None,
        ComponentKind::Weekly => next.weekly = None,
        ComponentKind::Yearly => next.yearly = None,
        ComponentKind::Values => next.values.clear(),
    }
    next
}

pub fn reset_all(_state: &AdjustmentState) -> AdjustmentState {
    AdjustmentState::default()
}

/// Applies any [`Edit`]. A values edit is all-or-nothing.
pub fn apply_edit(state: &AdjustmentState, edit: &Edit, ctx: &EditContext) -> Result<AdjustmentState, AdjustError> {
    match edit {
        Edit::Level(points) => apply_level_redraw(state, points, ctx.horizon),
        Edit::Weekly(handles) => apply_weekly_edit(state, handles),
        Edit::Yearly(points) => apply_yearly_redraw(state, points, ctx.yearly_order),
        Edit::Values(values) => values
            .iter()
            .try_fold(state.clone(), |s, v| apply_value_edit(&s, v.date, v.value, ctx.horizon)),
        Edit::Reset(kind) => Ok(reset_component(state, *kind)),
        Edit::ResetAll(_) => Ok(reset_all(state)),
    }
}

/// Recombines the model components with the adjustment state.
///
/// Per date: overridden or model level, plus overridden or model weekly and
/// yearly effects, plus the model's event effect. Pinned values then replace
/// the sum outright. Dates without any applicable override keep the model's
/// total bit-for-bit.
pub fn compose_final(model: &DecomposedForecast, state: &AdjustmentState) -> Vec<(Day, f64)> {
    model
        .points
        .iter()
        .map(|p| {
            if let Some(v) = state.values.get(&p.date) {
                return (p.date, *v);
            }
            let level = state.level.as_ref().and_then(|l| l.at(p.date));
            if level.is_none() && state.weekly.is_none() && state.yearly.is_none() {
                return (p.date, p.total);
            }
            let level = level.unwrap_or(p.level);
            let weekly = state.weekly.map_or(p.weekly, |w| w[p.date.weekday()]);
            let yearly = state.yearly.as_ref().map_or(p.yearly, |y| y.at(p.date.day_of_year()));
            (p.date, level + weekly + yearly + p.events)
        })
        .collect()
}
