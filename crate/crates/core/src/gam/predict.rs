use super::{DecomposedForecast, DecomposedPoint, FittedModel};
use crate::data::EventCalendar;
use crate::date::DayRange;

/// Evaluates every component of `model` on each day of `dates`.
///
/// Totals are not clamped; negative predictions are passed through.
pub fn predict_decomposed(
    model: &FittedModel,
    dates: DayRange,
    calendar: &EventCalendar,
) -> DecomposedForecast {
    let points = dates
        .iter()
        .map(|date| {
            let level = model.level(date);
            let weekly = model.weekly_effect(date);
            let yearly = model.yearly_effect(date);
            let events = model.event_effect(calendar.events_on(date));
            DecomposedPoint {
                date,
                level,
                weekly,
                yearly,
                events,
                total: level + weekly + yearly + events,
            }
        })
        .collect();
    DecomposedForecast { points }
}

/// Model totals over `dates`.
pub fn fitted_values(model: &FittedModel, dates: DayRange, calendar: &EventCalendar) -> Vec<f64> {
    predict_decomposed(model, dates, calendar).totals()
}
