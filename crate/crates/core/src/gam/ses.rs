//! Simple exponential smoothing, the flat-forecast benchmark.

use crate::data::ForecastTask;

/// Smoothing parameters searched by default: 0.01, 0.02, ..., 0.99.
pub fn default_alpha_grid() -> Vec<f64> {
    (1..=99).map(|i| i as f64 / 100.0).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SesFit {
    pub alpha: f64,
    /// Mean absolute one-step-ahead error over the history.
    pub in_sample_mae: f64,
    pub final_level: f64,
}

/// Runs the smoother over `history`, returning `(one-step MAE, final level)`.
///
/// The level starts at the first observation; errors are taken from the
/// second observation on.
pub fn smooth(history: &[f64], alpha: f64) -> (f64, f64) {
    let mut level = history[0];
    let mut abs_err = 0.0;
    for &y in &history[1..] {
        abs_err += (y - level).abs();
        level = alpha * y + (1.0 - alpha) * level;
    }
    (abs_err / (history.len() - 1).max(1) as f64, level)
}

/// Picks the grid value with the lowest in-sample one-step MAE (first wins on
/// ties).
pub fn fit_ses(history: &[f64], grid: &[f64]) -> Option<SesFit> {
    if history.len() < 2 {
        return None;
    }
    grid.iter()
        .map(|&alpha| {
            let (mae, level) = smooth(history, alpha);
            SesFit {
                alpha,
                in_sample_mae: mae,
                final_level: level,
            }
        })
        .fold(None, |best: Option<SesFit>, cand| match best {
            Some(b) if b.in_sample_mae <= cand.in_sample_mae => Some(b),
            _ => Some(cand),
        })
}

/// Flat SES forecast over the task horizon using the default grid.
pub fn ses_forecast(task: &ForecastTask) -> Vec<f64> {
    ses_forecast_with_grid(task, &default_alpha_grid())
}

pub fn ses_forecast_with_grid(task: &ForecastTask, grid: &[f64]) -> Vec<f64> {
    let level = fit_ses(&task.history.sales, grid)
        .map(|f| f.final_level)
        .or_else(|| task.history.last())
        .unwrap_or(0.0);
    vec![level; task.horizon_days()]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::TimeSeries;
    use crate::date::Day;

    fn task(history: Vec<f64>, horizon: usize) -> ForecastTask {
        ForecastTask {
            history: TimeSeries::new("p", Day(0), history).unwrap(),
            truth: vec![0.0; horizon],
        }
    }

    #[test]
    fn alpha_one_repeats_last_observation() {
        let t = task(vec![3.0, 9.0, 4.0, 7.0], 5);
        assert_eq!(ses_forecast_with_grid(&t, &[1.0]), vec![7.0; 5]);
    }

    #[test]
    fn constant_series_is_flat() {
        let t = task(vec![50.0; 60], 14);
        assert_eq!(ses_forecast(&t), vec![50.0; 14]);
    }

    #[test]
    fn alternating_series_picks_small_alpha() {
        let history: Vec<f64> = (0..200).map(|i| if i % 2 == 0 { 10.0 } else { 20.0 }).collect();
        // Brute-force oracle: evaluate every grid value independently.
        let mut best = (f64::INFINITY, 0.0);
        for i in 1..=99 {
            let a = i as f64 / 100.0;
            let mut level = history[0];
            let mut err = 0.0;
            for y in &history[1..] {
                err += (y - level).abs();
                level = a * y + (1.0 - a) * level;
            }
            if err < best.0 {
                best = (err, a);
            }
        }
        let fit = fit_ses(&history, &default_alpha_grid()).unwrap();
        assert_eq!(fit.alpha, best.1);
        assert!(fit.alpha <= 0.1, "alpha {}", fit.alpha);
        let f = ses_forecast(&task(history, 14));
        assert!((f[0] - 15.0).abs() < 1.0, "forecast {}", f[0]);
    }
}
