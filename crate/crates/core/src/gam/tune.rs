use super::{fit, predict_decomposed, ModelError, ModelSpec, MIN_HISTORY_DAYS};
use crate::data::{EventCalendar, ForecastTask, TimeSeries, DEFAULT_HORIZON_DAYS};
use crate::date::DayRange;
use crate::exec::Execution;

const FOLDS: usize = 3;

/// Cross-validation scores of a tuning run.
#[derive(Debug, Clone)]
pub struct TuneReport {
    pub best: ModelSpec,
    pub best_index: usize,
    /// Mean validation MAE per grid entry (`inf` when a spec failed to fit).
    pub scores: Vec<f64>,
    pub folds: usize,
}

/// Selects the grid spec with the lowest rolling-origin MAE.
pub fn tune(
    task: &ForecastTask,
    calendar: &EventCalendar,
    grid: &[ModelSpec],
) -> Result<ModelSpec, ModelError> {
    tune_with(task, calendar, grid, Execution::default()).map(|r| r.best)
}

/// Rolling-origin cross-validation over `grid`.
///
/// Three 14-day validation windows end at the history end and 14 and 28 days
/// before it; each fold trains on everything before its window. Histories too
/// short for three folds use one. Near-ties go to the spec with the larger
/// total penalty.
pub fn tune_with(
    task: &ForecastTask,
    calendar: &EventCalendar,
    grid: &[ModelSpec],
    exec: Execution,
) -> Result<TuneReport, ModelError> {
    if grid.is_empty() {
        return Err(ModelError::EmptyGrid);
    }
    let history = &task.history;
    let window = DEFAULT_HORIZON_DAYS;
    let n = history.len();
    let folds = if n >= MIN_HISTORY_DAYS + FOLDS * window {
        FOLDS
    } else if n >= MIN_HISTORY_DAYS + window {
        log::warn!(
            "history of {n} days too short for {FOLDS} folds, tuning '{}' on 1 fold",
            history.product_id
        );
        1
    } else {
        return Err(ModelError::HistoryTooShort {
            len: n,
            min: MIN_HISTORY_DAYS + window,
        });
    };

    let jobs: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|g| (0..folds).map(move |f| (g, f)))
        .collect();
    let fold_mae = exec.map(&jobs, |&(g, f)| {
        let train_len = n - (f + 1) * window;
        let train = TimeSeries {
            product_id: history.product_id.clone(),
            start: history.start,
            sales: history.sales[..train_len].to_vec(),
        };
        let actual = &history.sales[train_len..train_len + window];
        let model = fit(&train, calendar, &grid[g]).ok()?;
        let pred = predict_decomposed(&model, DayRange::new(train.end().offset(1), window), calendar);
        let abs: f64 = pred
            .points
            .iter()
            .zip(actual)
            .map(|(p, a)| (p.total - a).abs())
            .sum();
        Some(abs / window as f64)
    });

    let scores: Vec<f64> = fold_mae
        .chunks(folds)
        .map(|c| {
            c.iter()
                .try_fold(0.0, |acc, m| m.map(|m| acc + m))
                .map_or(f64::INFINITY, |s| s / folds as f64)
        })
        .collect();

    let mut best: Option<usize> = None;
    for (i, &score) in scores.iter().enumerate() {
        if !score.is_finite() {
            continue;
        }
        best = match best {
            None => Some(i),
            Some(b) => {
                let tol = 1e-12 * scores[b].abs().max(1.0);
                if score < scores[b] - tol
                    || ((score - scores[b]).abs() <= tol
                        && grid[i].total_penalty() > grid[b].total_penalty())
                {
                    Some(i)
                } else {
                    Some(b)
                }
            }
        };
    }
    let best_index = best.ok_or(ModelError::NoViableSpec)?;
    Ok(TuneReport {
        best: grid[best_index].clone(),
        best_index,
        scores,
        folds,
    })
}
