use std::collections::BTreeMap;

use chrono::Datelike;
use fss_core::data::{split_task, EventCalendar, ForecastTask, TimeSeries};
use fss_core::date::{Day, DayRange};
use fss_core::gam::basis::weekly_coeffs_from_profile;
use fss_core::gam::ses::ses_forecast;
use fss_core::gam::{fit, predict_decomposed, tune, tune_with, FittedModel, ModelError, ModelSpec};
use fss_core::synth::{SynthEvent, SynthSpec};
use fss_core::Execution;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn day(s: &str) -> Day {
    s.parse().unwrap()
}

fn low_penalty() -> ModelSpec {
    ModelSpec {
        trend_penalty: 1e-3,
        seasonal_penalty: 1e-3,
        event_penalty: 1e-3,
        ..Default::default()
    }
}

#[test]
fn constant_series_has_flat_components() {
    let series = TimeSeries::new("c", day("2014-01-01"), vec![50.0; 400]).unwrap();
    let model = fit(&series, &EventCalendar::new(), &ModelSpec::default()).unwrap();
    let fc = predict_decomposed(&model, DayRange::new(series.end().offset(1), 14), &EventCalendar::new());
    for p in &fc.points {
        assert!((p.level - 50.0).abs() < 0.1, "level {}", p.level);
        assert!(p.weekly.abs() < 0.1 && p.yearly.abs() < 0.1);
        assert_eq!(p.events, 0.0);
    }
}

#[test]
fn recovers_saturday_effect() {
    let mut spec = SynthSpec::new("w", day("2014-01-01"), 730, 100.0);
    spec.weekly = [-10.0, 0.0, 0.0, 0.0, 0.0, 10.0, 0.0];
    spec.noise_sd = 1.0;
    spec.seed = 11;
    let series = spec.generate();
    let model = fit(&series, &EventCalendar::new(), &low_penalty()).unwrap();
    let profile = model.weekly_profile();
    assert!((profile[5] - 10.0).abs() < 1.0, "saturday {}", profile[5]);
    assert!((profile[0] + 10.0).abs() < 1.0, "monday {}", profile[0]);
}

#[test]
fn recovers_event_effect() {
    let start = day("2014-01-01");
    let mut spec = SynthSpec::new("e", start, 730, 100.0);
    spec.noise_sd = 1.0;
    spec.seed = 5;
    spec.events.push(SynthEvent {
        name: "Promo".into(),
        days: vec![start.offset(60), start.offset(250), start.offset(430), start.offset(610)],
        effect: 40.0,
    });
    let series = spec.generate();
    let model = fit(&series, &spec.calendar(), &low_penalty()).unwrap();
    let effect = model.event_effects["Promo"];
    assert!((effect - 40.0).abs() < 5.0, "effect {effect}");
}

fn worked_example_model() -> FittedModel {
    let monday = day("2016-05-30");
    let mut profile = [0.0; 7];
    profile[0] = -16.5;
    profile[5] = 16.5;
    // Yearly: a single cosine term scaled so that the target date gets -28.4.
    let phase = (monday.day_of_year() as f64 - 1.0) / 365.25;
    let c = -28.4 / (std::f64::consts::TAU * phase).cos();
    FittedModel {
        origin: day("2011-01-29"),
        base_intercept: 72.0,
        base_slope: 0.0,
        changepoint_days: vec![],
        slope_deltas: vec![],
        weekly_coeffs: weekly_coeffs_from_profile(&profile, 3),
        yearly_coeffs: vec![0.0, c],
        event_effects: BTreeMap::from([("Memorial Day".to_string(), 43.1)]),
        diagnostics: None,
    }
}

#[test]
fn worked_example_decomposition() {
    let model = worked_example_model();
    let mut cal = EventCalendar::new();
    cal.set(day("2016-05-30"), vec!["Memorial Day".into()]).unwrap();
    let fc = predict_decomposed(&model, DayRange::new(day("2016-05-30"), 1), &cal);
    let p = &fc.points[0];
    assert!((p.level - 72.0).abs() < 1e-9);
    assert!((p.yearly + 28.4).abs() < 1e-9);
    assert!((p.weekly + 16.5).abs() < 1e-9);
    assert!((p.events - 43.1).abs() < 1e-9);
    assert!((p.total - 70.2).abs() < 1e-9, "total {}", p.total);
    assert_eq!(p.total.round(), 70.0);
}

#[test]
fn unknown_events_and_eventless_dates_contribute_zero() {
    let model = worked_example_model();
    let mut cal = EventCalendar::new();
    cal.set(day("2016-06-01"), vec!["NeverSeen".into()]).unwrap();
    let fc = predict_decomposed(&model, DayRange::new(day("2016-05-31"), 2), &cal);
    assert_eq!(fc.points[0].events, 0.0);
    assert_eq!(fc.points[1].events, 0.0);
}

fn noisy_seasonal(seed: u64, days: usize) -> (TimeSeries, EventCalendar) {
    let start = day("2013-02-01");
    let mut spec = SynthSpec::new("s", start, days, 100.0);
    spec.weekly = [-8.0, -5.0, -3.0, 0.0, 2.0, 9.0, 5.0];
    spec.yearly_amplitude = 20.0;
    spec.noise_sd = 3.0;
    spec.slope = 0.01;
    spec.seed = seed;
    spec.events.push(SynthEvent::yearly("Xmas", 12, 25, start, start.offset(days as i32), -30.0));
    let cal = spec.calendar();
    (spec.generate(), cal)
}

#[test]
fn weekly_effect_is_periodic_and_yearly_depends_on_day_of_year() {
    let (series, cal) = noisy_seasonal(3, 800);
    let model = fit(&series, &cal, &ModelSpec::default()).unwrap();
    let fc = predict_decomposed(&model, DayRange::new(series.start, 1200), &cal);
    for w in fc.points.windows(8) {
        assert_eq!(w[0].weekly, w[7].weekly);
    }
    let mut by_doy: BTreeMap<u16, f64> = BTreeMap::new();
    for p in &fc.points {
        let prev = by_doy.entry(p.date.day_of_year()).or_insert(p.yearly);
        assert_eq!(*prev, p.yearly);
    }
}

#[test]
fn fit_is_bit_deterministic() {
    let (series, cal) = noisy_seasonal(9, 500);
    let a = fit(&series, &cal, &ModelSpec::default()).unwrap();
    let b = fit(&series, &cal, &ModelSpec::default()).unwrap();
    assert_eq!(a, b);
    let bits = |m: &FittedModel| m.diagnostics.as_ref().unwrap().coefficients.iter().map(|c| c.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
}

#[test]
fn seasonal_norm_is_monotone_in_penalty() {
    let (series, cal) = noisy_seasonal(21, 600);
    let mut last = f64::INFINITY;
    for pen in [0.0, 0.1, 1.0, 10.0, 100.0, 1e3, 1e4, 1e5] {
        let spec = ModelSpec {
            seasonal_penalty: pen,
            ..Default::default()
        };
        let m = fit(&series, &cal, &spec).unwrap();
        let norm: f64 = m
            .weekly_coeffs
            .iter()
            .chain(&m.yearly_coeffs)
            .map(|c| c * c)
            .sum::<f64>()
            .sqrt();
        assert!(norm <= last + 1e-9, "penalty {pen}: {norm} > {last}");
        last = norm;
    }
}

#[test]
fn short_history_rejected() {
    let s = TimeSeries::new("x", day("2016-01-01"), vec![1.0; 13]).unwrap();
    assert!(matches!(
        fit(&s, &EventCalendar::new(), &ModelSpec::default()),
        Err(ModelError::HistoryTooShort { .. })
    ));
}

#[test]
fn zero_penalty_with_aliased_weekly_terms_is_ill_conditioned() {
    let s = TimeSeries::new("x", day("2016-01-01"), (0..60).map(|i| (i % 5) as f64).collect()).unwrap();
    let spec = ModelSpec {
        weekly_order: 4,
        seasonal_penalty: 0.0,
        n_changepoints: 0,
        yearly_order: 1,
        ..Default::default()
    };
    assert!(matches!(
        fit(&s, &EventCalendar::new(), &spec),
        Err(ModelError::IllConditioned { .. })
    ));
}

#[test]
fn decomposed_csv_export() {
    let model = worked_example_model();
    let fc = predict_decomposed(&model, DayRange::new(day("2016-05-30"), 2), &EventCalendar::new());
    let mut buf = Vec::new();
    fc.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("date,level,weekly,yearly,events,total"));
    assert!(lines.next().unwrap().starts_with("2016-05-30,72,"));
    assert_eq!(lines.count(), 1);
}

// --- oracle: brute-force normal equations --------------------------------

/// Gaussian elimination with partial pivoting.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

/// Builds the same penalized least-squares problem straight from its
/// definition and solves `(XᵀX + diag(p)) β = Xᵀy`.
fn oracle_coefficients(series: &TimeSeries, cal: &EventCalendar, spec: &ModelSpec) -> Vec<f64> {
    let n = series.len();
    let span = (n - 1) as f64;
    let last = ((spec.changepoint_range * span).floor() as usize).min(n - 2);
    let mut cps: Vec<usize> = (1..=spec.n_changepoints)
        .map(|i| (i as f64 * last as f64 / spec.n_changepoints as f64).round() as usize)
        .filter(|&i| i >= 1)
        .collect();
    cps.dedup();
    let mut events: Vec<String> = series
        .days()
        .flat_map(|d| cal.events_on(d).to_vec())
        .collect();
    events.sort();
    events.dedup();

    let mut rows = Vec::new();
    let mut pen = vec![0.0, 0.0];
    pen.extend(cps.iter().map(|_| spec.trend_penalty));
    pen.extend((0..2 * (spec.weekly_order + spec.yearly_order)).map(|_| spec.seasonal_penalty));
    pen.extend(events.iter().map(|_| spec.event_penalty));
    for (i, d) in series.days().enumerate() {
        let date = d.to_naive();
        let t = i as f64 / span;
        let mut row = vec![1.0, t];
        for &c in &cps {
            row.push((t - c as f64 / span).max(0.0));
        }
        let w = date.weekday().num_days_from_monday() as f64 / 7.0;
        for k in 1..=spec.weekly_order {
            let a = 2.0 * std::f64::consts::PI * k as f64 * w;
            row.extend([a.sin(), a.cos()]);
        }
        let yx = (date.ordinal() as f64 - 1.0) / 365.25;
        for k in 1..=spec.yearly_order {
            let a = 2.0 * std::f64::consts::PI * k as f64 * yx;
            row.extend([a.sin(), a.cos()]);
        }
        for e in &events {
            row.push(if cal.events_on(d).contains(e) { 1.0 } else { 0.0 });
        }
        rows.push(row);
    }
    let p = pen.len();
    let mut gram = vec![vec![0.0; p]; p];
    let mut rhs = vec![0.0; p];
    for (row, y) in rows.iter().zip(&series.sales) {
        for i in 0..p {
            rhs[i] += row[i] * y;
            for j in 0..p {
                gram[i][j] += row[i] * row[j];
            }
        }
    }
    for i in 0..p {
        gram[i][i] += pen[i];
    }
    solve_dense(gram, rhs)
}

#[test]
fn fit_matches_normal_equations_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..50 {
        let n = rng.random_range(20..=60);
        let start = Day(rng.random_range(14_000..17_000));
        let sales: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..100.0)).collect();
        let series = TimeSeries::new("o", start, sales).unwrap();
        let mut cal = EventCalendar::new();
        let n_events = rng.random_range(0..=2);
        for e in 0..n_events {
            for _ in 0..3 {
                let d = start.offset(rng.random_range(0..n as i32));
                cal.set(d, vec![format!("E{e}")]).unwrap();
            }
        }
        let spec = ModelSpec {
            n_changepoints: rng.random_range(0..=2),
            changepoint_range: 0.8,
            weekly_order: rng.random_range(1..=2),
            yearly_order: 1,
            trend_penalty: rng.random_range(0.0..5.0),
            seasonal_penalty: rng.random_range(0.0..5.0),
            event_penalty: rng.random_range(0.0..5.0),
        };
        let model = fit(&series, &cal, &spec).unwrap();
        let got = &model.diagnostics.as_ref().unwrap().coefficients;
        assert!(got.len() <= 12, "case {case}: {} parameters", got.len());
        let want = oracle_coefficients(&series, &cal, &spec);
        assert_eq!(got.len(), want.len(), "case {case}");
        let num: f64 = got.iter().zip(&want).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let den: f64 = want.iter().map(|b| b * b).sum::<f64>().sqrt();
        assert!(num / den < 1e-6, "case {case}: relative error {}", num / den);
    }
}

// --- tuning ----------------------------------------------------------------

fn task_of(series: TimeSeries) -> ForecastTask {
    split_task(&series, 14).unwrap()
}

#[test]
fn single_spec_grid_returns_it() {
    let (series, cal) = noisy_seasonal(1, 200);
    let spec = ModelSpec {
        trend_penalty: 3.0,
        ..Default::default()
    };
    assert_eq!(tune(&task_of(series), &cal, &[spec.clone()]).unwrap(), spec);
}

#[test]
fn empty_grid_rejected() {
    let (series, cal) = noisy_seasonal(1, 200);
    assert!(matches!(tune(&task_of(series), &cal, &[]), Err(ModelError::EmptyGrid)));
}

#[test]
fn short_history_tunes_on_one_fold() {
    let (series, cal) = noisy_seasonal(1, 14 + 40);
    let report = tune_with(&task_of(series), &cal, &[ModelSpec::default()], Execution::Sequential).unwrap();
    assert_eq!(report.folds, 1);
}

#[test]
fn tie_prefers_larger_penalties() {
    let (series, _) = noisy_seasonal(1, 200);
    // The specs differ only in the penalty on event columns, and with an
    // empty calendar there are none, so the scores tie exactly.
    let a = ModelSpec::default();
    let b = ModelSpec {
        event_penalty: 50.0,
        ..Default::default()
    };
    let report = tune_with(&task_of(series), &EventCalendar::new(), &[a, b.clone()], Execution::Sequential).unwrap();
    assert_eq!(report.scores[0], report.scores[1]);
    assert_eq!(report.best, b);
}

#[test]
fn pure_noise_prefers_high_penalty() {
    let low = ModelSpec {
        trend_penalty: 1e-4,
        seasonal_penalty: 1e-4,
        event_penalty: 1e-4,
        ..Default::default()
    };
    let high = ModelSpec {
        trend_penalty: 1e4,
        seasonal_penalty: 1e4,
        event_penalty: 1e4,
        ..Default::default()
    };
    let mut high_wins = 0;
    for seed in 0..20 {
        let mut spec = SynthSpec::new("n", day("2014-03-01"), 500, 50.0);
        spec.noise_sd = 8.0;
        spec.seed = 100 + seed;
        let task = task_of(spec.generate());
        let best = tune(&task, &EventCalendar::new(), &[low.clone(), high.clone()]).unwrap();
        high_wins += usize::from(best == high);
    }
    assert!(high_wins >= 14, "high penalty won {high_wins}/20");
}

#[test]
fn strong_seasonality_prefers_low_seasonal_penalty() {
    let low = ModelSpec {
        seasonal_penalty: 1e-2,
        ..Default::default()
    };
    let high = ModelSpec {
        seasonal_penalty: 1e5,
        ..Default::default()
    };
    let mut low_wins = 0;
    for seed in 0..20 {
        let (series, cal) = noisy_seasonal(200 + seed, 800);
        let best = tune(&task_of(series), &cal, &[low.clone(), high.clone()]).unwrap();
        low_wins += usize::from(best == low);
    }
    assert!(low_wins >= 18, "low seasonal penalty won {low_wins}/20");
}

#[test]
fn parallel_and_sequential_tuning_agree() {
    let (series, cal) = noisy_seasonal(4, 300);
    let task = task_of(series);
    let grid: Vec<ModelSpec> = [0.01, 1.0, 100.0]
        .iter()
        .map(|&p| ModelSpec {
            seasonal_penalty: p,
            ..Default::default()
        })
        .collect();
    let a = tune_with(&task, &cal, &grid, Execution::Sequential).unwrap();
    let b = tune_with(&task, &cal, &grid, Execution::Parallel).unwrap();
    assert_eq!(a.scores, b.scores);
    assert_eq!(a.best, b.best);
}

#[test]
fn ses_constant_and_gam_agree_on_flat_data() {
    let s = TimeSeries::new("c", day("2015-01-01"), vec![50.0; 120]).unwrap();
    let task = task_of(s);
    assert_eq!(ses_forecast(&task), vec![50.0; 14]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn totals_are_sums_of_components(seed in 0u64..1000, len in 30usize..200, offset in -400i32..400) {
        let (series, cal) = noisy_seasonal(seed, len);
        let model = fit(&series, &cal, &ModelSpec::default()).unwrap();
        let fc = predict_decomposed(&model, DayRange::new(series.start.offset(offset), 60), &cal);
        for p in &fc.points {
            prop_assert!((p.total - (p.level + p.weekly + p.yearly + p.events)).abs() < 1e-9);
        }
    }
}
