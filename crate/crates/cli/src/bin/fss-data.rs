use std::fs::File;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use fss_core::data::{load_calendar_csv, load_sales_csv, m5, save_sales_csv, split_task, write_calendar, EventCalendar};
use fss_core::gam::{fit, predict_decomposed, tune_with, ModelSpec, SpecGrid};
use fss_core::synth::m5_like_dataset;
use fss_core::{DayRange, Execution};

#[derive(Parser, Debug)]
#[command(version, about = "Prepare sales data and produce decomposed forecasts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Convert the wide M5 layout into long sales and calendar files.
    Melt {
        #[arg(long)]
        sales: PathBuf,
        #[arg(long)]
        calendar: PathBuf,
        #[arg(long)]
        out_sales: PathBuf,
        #[arg(long)]
        out_calendar: PathBuf,
        /// Comma separated series ids to keep.
        #[arg(long, value_delimiter = ',')]
        ids: Vec<String>,
    },
    /// Generate an M5-like synthetic dataset.
    Synth {
        #[arg(long, default_value_t = 12)]
        products: usize,
        #[arg(long, default_value_t = 900)]
        days: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out_sales: PathBuf,
        #[arg(long)]
        out_calendar: PathBuf,
    },
    /// Fit one product and write its decomposed forecast as CSV.
    Forecast {
        #[arg(long)]
        sales: PathBuf,
        #[arg(long)]
        calendar: Option<PathBuf>,
        #[arg(long)]
        product: String,
        /// Model spec file; defaults apply when absent.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Tune over this grid instead of using a single spec.
        #[arg(long, conflicts_with = "spec")]
        grid: Option<PathBuf>,
        #[arg(long, default_value_t = 14)]
        horizon: usize,
        /// Hold the last `horizon` days out and forecast them instead of
        /// the days after the history.
        #[arg(long)]
        holdout: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Melt {
            sales,
            calendar,
            out_sales,
            out_calendar,
            ids,
        } => {
            let cal = m5::read_m5_calendar(File::open(&calendar)?)?;
            let keep = (!ids.is_empty()).then_some(ids.as_slice());
            let series = m5::melt_sales(File::open(&sales)?, &cal, keep)?;
            save_sales_csv(&out_sales, &series)?;
            write_calendar(File::create(&out_calendar)?, &cal.events)?;
            log::info!("{} series melted", series.len());
        }
        Command::Synth {
            products,
            days,
            seed,
            out_sales,
            out_calendar,
        } => {
            let data = m5_like_dataset(products, days, seed);
            save_sales_csv(&out_sales, &data.series)?;
            write_calendar(File::create(&out_calendar)?, &data.calendar)?;
        }
        Command::Forecast {
            sales,
            calendar,
            product,
            spec,
            grid,
            horizon,
            holdout,
            out,
        } => {
            let all = load_sales_csv(&sales)?;
            let series = all
                .into_iter()
                .find(|s| s.product_id == product)
                .ok_or_else(|| format!("product '{product}' not in {}", sales.display()))?;
            let cal = match calendar {
                Some(p) => load_calendar_csv(p)?,
                None => EventCalendar::new(),
            };
            let history = if holdout { split_task(&series, horizon)?.history } else { series };
            let spec = match (spec, grid) {
                (Some(p), _) => ModelSpec::from_toml_file(p)?,
                (None, Some(g)) => {
                    let grid = SpecGrid::from_toml_file(g)?;
                    let task = split_task(&history, horizon)?;
                    let report = tune_with(&task, &cal, &grid.specs, Execution::default())?;
                    log::info!("grid entry {} chosen over {} folds", report.best_index, report.folds);
                    report.best
                }
                (None, None) => ModelSpec::default(),
            };
            let model = fit(&history, &cal, &spec)?;
            let fc = predict_decomposed(&model, DayRange::new(history.end().offset(1), horizon), &cal);
            fc.write_csv(File::create(&out)?)?;
        }
    }
    Ok(())
}
