//! Fourier bases for the weekly and yearly cycles and changepoint placement.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};

/// Length of the yearly cycle in days.
pub const YEAR_DAYS: f64 = 365.25;

/// Cycle phase in `[0, 1)` for a weekday index (Monday = 0).
pub fn weekly_phase(weekday: usize) -> f64 {
    weekday as f64 / 7.0
}

/// Cycle phase in `[0, 1)` for an ordinal day of year (1..=366).
pub fn yearly_phase(day_of_year: u16) -> f64 {
    (day_of_year as f64 - 1.0) / YEAR_DAYS
}

/// Appends `[sin(2πkx), cos(2πkx)]` for k = 1..=order to `out`.
pub fn fourier_row(phase: f64, order: usize, out: &mut Vec<f64>) {
    for k in 1..=order {
        let arg = TAU * k as f64 * phase;
        out.push(arg.sin());
        out.push(arg.cos());
    }
}

/// Evaluates `Σ a_k sin(2πkx) + b_k cos(2πkx)` with interleaved coefficients.
pub fn fourier_value(coeffs: &[f64], phase: f64) -> f64 {
    coeffs
        .chunks_exact(2)
        .enumerate()
        .map(|(i, ab)| {
            let arg = TAU * (i + 1) as f64 * phase;
            ab[0] * arg.sin() + ab[1] * arg.cos()
        })
        .sum()
}

pub fn weekly_value(coeffs: &[f64], weekday: usize) -> f64 {
    fourier_value(coeffs, weekly_phase(weekday))
}

pub fn yearly_value(coeffs: &[f64], day_of_year: u16) -> f64 {
    fourier_value(coeffs, yearly_phase(day_of_year))
}

/// Least-squares Fourier coefficients reproducing a weekday profile.
///
/// With order 3 the 6 terms span every zero-mean weekday pattern, so a
/// zero-mean profile is reproduced exactly; any mean is dropped.
pub fn weekly_coeffs_from_profile(profile: &[f64; 7], order: usize) -> Vec<f64> {
    let phases: Vec<f64> = (0..7).map(weekly_phase).collect();
    let (_, coeffs) = fit_fourier(&phases, profile, order, false);
    coeffs
}

/// Least-squares fit of an (optional) offset plus an order-`order` Fourier
/// series to `(phase, value)` samples. Returns `(offset, coeffs)`.
///
/// Solved by SVD, so aliased bases (order above the Nyquist limit of the
/// samples) get the minimum-norm solution.
pub fn fit_fourier(phases: &[f64], values: &[f64], order: usize, with_offset: bool) -> (f64, Vec<f64>) {
    let lead = usize::from(with_offset);
    let p = lead + 2 * order;
    let mut x = DMatrix::<f64>::zeros(phases.len(), p);
    let mut row = Vec::with_capacity(2 * order);
    for (i, &ph) in phases.iter().enumerate() {
        row.clear();
        fourier_row(ph, order, &mut row);
        if with_offset {
            x[(i, 0)] = 1.0;
        }
        for (j, v) in row.iter().enumerate() {
            x[(i, lead + j)] = *v;
        }
    }
    let y = DVector::from_column_slice(values);
    let sol = x
        .svd(true, true)
        .solve(&y, 1e-12)
        .unwrap_or_else(|_| DVector::zeros(p));
    let offset = if with_offset { sol[0] } else { 0.0 };
    (offset, sol.iter().skip(lead).copied().collect())
}

/// Indices into a history of length `n` at which the trend may change slope.
///
/// Candidates are spread uniformly over the first `range` fraction of the
/// history; index 0 is never a changepoint and duplicates are dropped.
pub fn changepoint_indices(n: usize, n_changepoints: usize, range: f64) -> Vec<usize> {
    if n < 3 || n_changepoints == 0 {
        return Vec::new();
    }
    let last = ((range * (n - 1) as f64).floor() as usize).min(n - 2);
    if last == 0 {
        return Vec::new();
    }
    let mut out: Vec<usize> = (1..=n_changepoints)
        .map(|i| (i as f64 * last as f64 / n_changepoints as f64).round() as usize)
        .filter(|&i| i >= 1)
        .collect();
    out.dedup();
    out
}
