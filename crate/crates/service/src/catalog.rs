use std::sync::Arc;

use fss_core::adjust::{weekly_residual_view, yearly_residual_view, ResidualPoint, YearlyPoint};
use fss_core::data::{load_calendar_csv, load_sales_csv, split_task, EventCalendar, ForecastTask, TimeSeries};
use fss_core::gam::basis::yearly_value;
use fss_core::gam::ses::ses_forecast;
use fss_core::gam::{fit, predict_decomposed, tune_with, DecomposedForecast, FittedModel, ModelSpec, SpecGrid};
use fss_core::metrics::relative_mae;
use fss_core::synth::m5_like_dataset;
use fss_core::Execution;

use crate::config::ServiceConfig;
use crate::ServiceError;

/// Everything precomputed for one product: the fitted model, its
/// decomposition over history and horizon, the benchmark forecast and the
/// residual views.
#[derive(Debug)]
pub struct Product {
    pub id: String,
    pub task: ForecastTask,
    pub spec: ModelSpec,
    pub model: FittedModel,
    pub fitted: DecomposedForecast,
    pub forecast: DecomposedForecast,
    /// Simple exponential smoothing forecast over the horizon.
    pub ses: Vec<f64>,
    pub model_vs_ses_rmae: Option<f64>,
    /// Weekly fluctuations at the slider maximum.
    pub weekly_residuals: Vec<ResidualPoint>,
    /// `None` when the history is shorter than a year.
    pub yearly_residuals: Option<Vec<ResidualPoint>>,
    /// The model's yearly effect for days of year 1..=366.
    pub yearly_curve: Vec<YearlyPoint>,
}

impl Product {
    pub fn build(
        task: ForecastTask,
        calendar: &EventCalendar,
        spec: ModelSpec,
        max_weeks: usize,
        yearly_points: usize,
    ) -> Result<Self, ServiceError> {
        let model = fit(&task.history, calendar, &spec)?;
        let fitted = predict_decomposed(&model, task.history.range(), calendar);
        let forecast = predict_decomposed(&model, task.horizon(), calendar);
        let ses = ses_forecast(&task);
        let model_vs_ses_rmae = relative_mae(&forecast.totals(), &ses, &task.truth).ok();
        let weekly_residuals = weekly_residual_view(&model, &task.history, calendar, max_weeks)?;
        let yearly_residuals = yearly_residual_view(&model, &task.history, calendar, yearly_points).ok();
        let yearly_curve = (1..=366)
            .map(|d| YearlyPoint {
                day_of_year: d,
                value: yearly_value(&model.yearly_coeffs, d),
            })
            .collect();
        Ok(Product {
            id: task.history.product_id.clone(),
            task,
            spec,
            model,
            fitted,
            forecast,
            ses,
            model_vs_ses_rmae,
            weekly_residuals,
            yearly_residuals,
            yearly_curve,
        })
    }

    /// Weekly fluctuations limited to the last `weeks` occurrences per weekday.
    pub fn weekly_residuals_limited(&self, weeks: usize) -> Vec<ResidualPoint> {
        let mut out = Vec::new();
        for dow in 0..7u16 {
            let pts: Vec<&ResidualPoint> = self.weekly_residuals.iter().filter(|p| p.slot == dow).collect();
            let skip = pts.len().saturating_sub(weeks);
            out.extend(pts[skip..].iter().copied());
        }
        out
    }
}

/// Immutable set of products offered to participants.
#[derive(Debug)]
pub struct Catalog {
    pub products: Vec<Arc<Product>>,
    pub calendar: EventCalendar,
}

/// How each product's model spec is chosen.
#[derive(Debug, Clone)]
pub enum SpecChoice {
    Fixed(ModelSpec),
    Tuned(Vec<ModelSpec>),
}

impl Catalog {
    /// Fits every selected series. `selection` lists product ids in offer
    /// order; empty selects all series in input order.
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        series: &[TimeSeries],
        calendar: EventCalendar,
        selection: &[String],
        horizon_days: usize,
        specs: &SpecChoice,
        max_weeks: usize,
        yearly_points: usize,
        exec: Execution,
    ) -> Result<Self, ServiceError> {
        let chosen: Vec<&TimeSeries> = if selection.is_empty() {
            series.iter().collect()
        } else {
            selection
                .iter()
                .map(|id| {
                    series
                        .iter()
                        .find(|s| &s.product_id == id)
                        .ok_or_else(|| ServiceError::Config(format!("product '{id}' not found in the sales data")))
                })
                .collect::<Result<_, _>>()?
        };
        if chosen.is_empty() {
            return Err(ServiceError::Config("no products to offer".into()));
        }
        let built = exec.map(&chosen, |s| -> Result<Product, ServiceError> {
            let task = split_task(s, horizon_days)?;
            let spec = match specs {
                SpecChoice::Fixed(spec) => spec.clone(),
                // Products already run in parallel here.
                SpecChoice::Tuned(grid) => tune_with(&task, &calendar, grid, Execution::Sequential)?.best,
            };
            Product::build(task, &calendar, spec, max_weeks, yearly_points)
        });
        let products = built
            .into_iter()
            .map(|p| p.map(Arc::new))
            .collect::<Result<Vec<_>, _>>()?;
        log::info!("catalog ready with {} products", products.len());
        Ok(Catalog { products, calendar })
    }

    pub fn from_config(cfg: &ServiceConfig) -> Result<Self, ServiceError> {
        let (series, calendar) = match (&cfg.data.sales, &cfg.data.synthetic) {
            (Some(sales), _) => {
                let calendar = match &cfg.data.calendar {
                    Some(path) => load_calendar_csv(path)?,
                    None => EventCalendar::new(),
                };
                (load_sales_csv(sales)?, calendar)
            }
            (None, Some(syn)) => {
                let data = m5_like_dataset(syn.products, syn.days, syn.seed);
                (data.series, data.calendar)
            }
            (None, None) => return Err(ServiceError::Config("no data source configured".into())),
        };
        let specs = match (&cfg.model.grid, &cfg.model.spec) {
            (Some(grid), _) => SpecChoice::Tuned(SpecGrid::from_toml_file(grid)?.specs),
            (None, Some(spec)) => SpecChoice::Fixed(ModelSpec::from_toml_file(spec)?),
            (None, None) => SpecChoice::Fixed(ModelSpec::default()),
        };
        Catalog::build(
            &series,
            calendar,
            &cfg.products,
            cfg.horizon_days,
            &specs,
            cfg.max_weeks_shown,
            cfg.yearly_points_shown,
            Execution::default(),
        )
    }

    pub fn len(&self) -> usize {
        self.products.len()
    }

    pub fn is_empty(&self) -> bool {
        self.products.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Arc<Product>> {
        self.products.iter().find(|p| p.id == id)
    }
}
