use std::path::PathBuf;
use std::sync::Arc;

use clap::Parser;
use fss_service::config::ServiceConfig;
use fss_service::http::router;
use fss_service::{Catalog, EventStore, FileStore, MemoryStore, SessionService};

/// Serve the forecasting support system experiment over HTTP.
#[derive(Parser, Debug)]
#[command(version)]
struct Args {
    /// Service configuration (TOML). FSS_* environment variables override it.
    #[arg(long, default_value = "config/server.toml")]
    config: PathBuf,
    /// Port override.
    #[arg(long)]
    port: Option<u16>,
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    let mut config = ServiceConfig::from_file(&args.config)?;
    config.apply_env(|k| std::env::var(k).ok())?;
    if let Some(port) = args.port {
        config.port = port;
    }
    config.validate()?;

    let catalog = Arc::new(Catalog::from_config(&config)?);
    let store: Box<dyn EventStore> = match &config.store.dir {
        Some(dir) => Box::new(FileStore::open(dir)?),
        None => {
            log::warn!("no store directory configured, sessions are kept in memory only");
            Box::new(MemoryStore::new())
        }
    };
    let port = config.port;
    let service = Arc::new(SessionService::new(config, catalog, store)?);

    let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(service))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
