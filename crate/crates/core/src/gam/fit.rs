use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use super::basis::{self, changepoint_indices};
use super::{FitDiagnostics, FittedModel, ModelError, ModelSpec, MIN_HISTORY_DAYS};
use crate::data::{EventCalendar, TimeSeries};
use crate::date::Day;

/// Column blocks of the design matrix, in order.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignLayout {
    pub n_changepoints: usize,
    pub weekly_order: usize,
    pub yearly_order: usize,
    /// Event names with a column, sorted.
    pub events: Vec<String>,
}

impl DesignLayout {
    pub fn changepoints(&self) -> Range<usize> {
        2..2 + self.n_changepoints
    }

    pub fn weekly(&self) -> Range<usize> {
        let s = self.changepoints().end;
        s..s + 2 * self.weekly_order
    }

    pub fn yearly(&self) -> Range<usize> {
        let s = self.weekly().end;
        s..s + 2 * self.yearly_order
    }

    pub fn event_columns(&self) -> Range<usize> {
        let s = self.yearly().end;
        s..s + self.events.len()
    }

    pub fn n_columns(&self) -> usize {
        self.event_columns().end
    }
}

/// The penalized least-squares problem for one history.
///
/// Columns: intercept, scaled time `t = (d - origin) / time_span`, one hinge
/// `max(0, t - t_j)` per changepoint, weekly Fourier terms, yearly Fourier
/// terms, and a 0/1 indicator per event seen in the history. The fit
/// minimizes `‖y - Xβ‖² + Σ penalties[i]·β[i]²`.
#[derive(Debug, Clone)]
pub struct Design {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub penalties: Vec<f64>,
    pub layout: DesignLayout,
    pub origin: Day,
    pub time_span: f64,
    pub changepoints: Vec<Day>,
}

pub fn build_design(
    history: &TimeSeries,
    calendar: &EventCalendar,
    spec: &ModelSpec,
) -> Result<Design, ModelError> {
    spec.validate()?;
    let n = history.len();
    if n < MIN_HISTORY_DAYS {
        return Err(ModelError::HistoryTooShort {
            len: n,
            min: MIN_HISTORY_DAYS,
        });
    }
    let origin = history.start;
    let time_span = (n - 1).max(1) as f64;
    let changepoints: Vec<Day> = changepoint_indices(n, spec.n_changepoints, spec.changepoint_range)
        .into_iter()
        .map(|i| origin.offset(i as i32))
        .collect();

    let events: BTreeSet<&str> = history
        .days()
        .flat_map(|d| calendar.events_on(d).iter().map(String::as_str))
        .collect();
    let layout = DesignLayout {
        n_changepoints: changepoints.len(),
        weekly_order: spec.weekly_order,
        yearly_order: spec.yearly_order,
        events: events.iter().map(|s| s.to_string()).collect(),
    };
    let p = layout.n_columns();

    let mut x = DMatrix::<f64>::zeros(n, p);
    let mut row = Vec::with_capacity(p);
    for (i, day) in history.days().enumerate() {
        row.clear();
        row.push(1.0);
        row.push(day.since(origin) as f64 / time_span);
        for cp in &changepoints {
            row.push((day.since(*cp) as f64).max(0.0) / time_span);
        }
        basis::fourier_row(basis::weekly_phase(day.weekday()), spec.weekly_order, &mut row);
        basis::fourier_row(basis::yearly_phase(day.day_of_year()), spec.yearly_order, &mut row);
        let todays = calendar.events_on(day);
        for name in &layout.events {
            row.push(if todays.contains(name) { 1.0 } else { 0.0 });
        }
        for (j, v) in row.iter().enumerate() {
            x[(i, j)] = *v;
        }
    }

    let mut penalties = vec![0.0; p];
    penalties[layout.changepoints()].fill(spec.trend_penalty);
    penalties[layout.weekly()].fill(spec.seasonal_penalty);
    penalties[layout.yearly()].fill(spec.seasonal_penalty);
    penalties[layout.event_columns()].fill(spec.event_penalty);

    Ok(Design {
        x,
        y: DVector::from_column_slice(&history.sales),
        penalties,
        layout,
        origin,
        time_span,
        changepoints,
    })
}

impl Design {
    /// Solves the penalized problem by QR of the stacked system
    /// `[X; diag(√penalty)] β ≈ [y; 0]`.
    pub fn solve(&self) -> Result<Vec<f64>, ModelError> {
        let (n, p) = self.x.shape();
        let mut stacked = DMatrix::<f64>::zeros(n + p, p);
        stacked.view_mut((0, 0), (n, p)).copy_from(&self.x);
        for (j, pen) in self.penalties.iter().enumerate() {
            stacked[(n + j, j)] = pen.sqrt();
        }
        let qr = stacked.qr();
        let r = qr.r();
        let scale = (0..p).map(|j| r[(j, j)].abs()).fold(0.0, f64::max);
        if let Some(column) = (0..p).find(|&j| !(r[(j, j)].abs() > 1e-10 * scale)) {
            return Err(ModelError::IllConditioned { column });
        }
        let q = qr.q();
        let qty = q.rows(0, n).transpose() * &self.y;
        let beta = r
            .solve_upper_triangular(&qty)
            .ok_or(ModelError::IllConditioned { column: 0 })?;
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(ModelError::IllConditioned { column: 0 });
        }
        Ok(beta.iter().copied().collect())
    }
}

/// Fits the additive model to the task's history.
///
/// Deterministic: identical inputs give bit-identical parameters.
pub fn fit(
    history: &TimeSeries,
    calendar: &EventCalendar,
    spec: &ModelSpec,
) -> Result<FittedModel, ModelError> {
    let design = build_design(history, calendar, spec)?;
    let beta = design.solve()?;
    let layout = &design.layout;
    let span = design.time_span;

    let fitted = &design.x * DVector::from_column_slice(&beta);
    let rss: f64 = fitted
        .iter()
        .zip(design.y.iter())
        .map(|(f, y)| (y - f) * (y - f))
        .sum();
    let n = design.y.len();

    Ok(FittedModel {
        origin: design.origin,
        base_intercept: beta[0],
        base_slope: beta[1] / span,
        changepoint_days: design.changepoints.clone(),
        slope_deltas: beta[layout.changepoints()].iter().map(|d| d / span).collect(),
        weekly_coeffs: beta[layout.weekly()].to_vec(),
        yearly_coeffs: beta[layout.yearly()].to_vec(),
        event_effects: layout
            .events
            .iter()
            .cloned()
            .zip(beta[layout.event_columns()].iter().copied())
            .collect::<BTreeMap<_, _>>(),
        diagnostics: Some(FitDiagnostics {
            n_obs: n,
            rss,
            residual_sd: (rss / n as f64).sqrt(),
            coefficients: beta,
        }),
    })
}
