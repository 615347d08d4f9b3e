use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::AdjustError;
use crate::data::{EventCalendar, TimeSeries};
use crate::date::Day;
use crate::gam::{predict_decomposed, FittedModel};

/// Days of history the yearly view requires.
const YEAR_OF_HISTORY: usize = 365;

/// An observed fluctuation around one seasonal component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualPoint {
    /// Weekday index (Monday = 0) in the weekly view, day of year in the
    /// yearly view.
    pub slot: u16,
    pub date: Day,
    /// Observed value minus the model prediction without this component.
    pub value: f64,
}

/// Observed value minus the fitted total with `component` removed, per day.
fn partial_residuals(
    model: &FittedModel,
    history: &TimeSeries,
    calendar: &EventCalendar,
    component: impl Fn(&crate::gam::DecomposedPoint) -> f64,
) -> Vec<(Day, f64)> {
    let fit = predict_decomposed(model, history.range(), calendar);
    fit.points
        .iter()
        .zip(&history.sales)
        .map(|(p, y)| (p.date, y - (p.total - component(p))))
        .collect()
}

/// Weekly fluctuations for the most recent `weeks_shown` weeks: for each
/// weekday, its last `weeks_shown` occurrences in the history, oldest first.
pub fn weekly_residual_view(
    model: &FittedModel,
    history: &TimeSeries,
    calendar: &EventCalendar,
    weeks_shown: usize,
) -> Result<Vec<ResidualPoint>, AdjustError> {
    if weeks_shown == 0 {
        return Err(AdjustError::NothingToShow);
    }
    let residuals = partial_residuals(model, history, calendar, |p| p.weekly);
    let mut by_weekday: [Vec<(Day, f64)>; 7] = Default::default();
    for (date, r) in residuals {
        by_weekday[date.weekday()].push((date, r));
    }
    Ok(by_weekday
        .iter()
        .enumerate()
        .flat_map(|(dow, pts)| {
            let skip = pts.len().saturating_sub(weeks_shown);
            pts[skip..].iter().map(move |&(date, value)| ResidualPoint {
                slot: dow as u16,
                date,
                value,
            })
        })
        .collect())
}

/// Yearly fluctuations of the most recent `points_shown` history days,
/// grouped by day of year and ordered by date within each day.
pub fn yearly_residual_view(
    model: &FittedModel,
    history: &TimeSeries,
    calendar: &EventCalendar,
    points_shown: usize,
) -> Result<Vec<ResidualPoint>, AdjustError> {
    if history.len() < YEAR_OF_HISTORY {
        return Err(AdjustError::HistoryTooShort {
            needed: YEAR_OF_HISTORY,
            got: history.len(),
        });
    }
    if points_shown == 0 {
        return Err(AdjustError::NothingToShow);
    }
    let residuals = partial_residuals(model, history, calendar, |p| p.yearly);
    let skip = residuals.len().saturating_sub(points_shown);
    let mut by_doy: BTreeMap<u16, Vec<(Day, f64)>> = BTreeMap::new();
    for &(date, r) in &residuals[skip..] {
        by_doy.entry(date.day_of_year()).or_default().push((date, r));
    }
    Ok(by_doy
        .into_iter()
        .flat_map(|(doy, pts)| {
            pts.into_iter().map(move |(date, value)| ResidualPoint {
                slot: doy,
                date,
                value,
            })
        })
        .collect())
}
