use std::path::PathBuf;

use clap::{Parser, Subcommand};
use fss_core::metrics::{summarize, write_tables, Filters};
use fss_sim::SimConfig;

#[derive(Parser, Debug)]
#[command(version, about = "Run simulated judges through the forecasting support system")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the experiment and write the raw results file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the summary tables into this directory.
        #[arg(long)]
        tables: Option<PathBuf>,
        /// Balance products within each treatment before summarizing.
        #[arg(long)]
        resample_seed: Option<u64>,
        /// Override the config's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Run {
            config,
            out,
            tables,
            resample_seed,
            seed,
        } => {
            let mut cfg = SimConfig::from_file(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let run = fss_sim::run(&cfg)?;
            std::fs::write(&out, &run.results_csv)?;
            log::info!(
                "{} sessions, {} rows, {} refused duplicates, {} early sign-offs rejected -> {}",
                run.outcomes.len(),
                run.records.len(),
                run.refused.len(),
                run.early_rejections(),
                out.display()
            );
            if let Some(dir) = tables {
                let report = summarize(&run.records, &Filters::default(), resample_seed)?;
                write_tables(&report, &dir)?;
                log::info!("tables written to {}", dir.display());
            }
        }
    }
    Ok(())
}
