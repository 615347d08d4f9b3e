use std::path::PathBuf;

use clap::{Parser, Subcommand};
use fss_cli::render_report;
use fss_core::metrics::{read_results, summarize, write_tables, Filters};

#[derive(Parser, Debug)]
#[command(version, about = "Summary tables from experiment results")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Filter, optionally resample, and write the summary tables.
    Summarize {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Balance per-product counts within each treatment with this seed.
        #[arg(long)]
        resample_seed: Option<u64>,
        /// Keep sessions of workers who took part more than once.
        #[arg(long)]
        keep_duplicates: bool,
        /// Minimum session completion time; 0 disables the filter.
        #[arg(long, default_value_t = 180.0)]
        min_completion_seconds: f64,
    },
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Summarize {
            input,
            out,
            resample_seed,
            keep_duplicates,
            min_completion_seconds,
        } => {
            let records = read_results(std::fs::File::open(&input)?)?;
            let filters = Filters {
                drop_duplicates: !keep_duplicates,
                min_completion_seconds: (min_completion_seconds > 0.0).then_some(min_completion_seconds),
            };
            let report = summarize(&records, &filters, resample_seed)?;
            write_tables(&report, &out)?;
            print!("{}", render_report(&report));
            log::info!("{} records read, tables in {}", records.len(), out.display());
        }
    }
    Ok(())
}
