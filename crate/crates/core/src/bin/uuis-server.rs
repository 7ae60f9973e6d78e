use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use clap::Parser;
use tracing_subscriber::EnvFilter;
use uuis::clock::SystemClock;
use uuis::config::Config;
use uuis::Uuis;

/// Serve the inventory API over HTTP.
#[derive(Parser)]
#[command(version)]
struct Args {
    /// TOML configuration; `UUIS_*` variables override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `listen`.
    #[arg(long)]
    listen: Option<String>,
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .init();
    let args = Args::parse();
    let mut config = Config::load(args.config.as_deref())?;
    if let Some(listen) = args.listen {
        config.listen = listen;
    }

    let uuis = Uuis::open(config.clone(), Arc::new(SystemClock))?;
    let schedule = uuis.start_backup_schedule(Duration::from_secs(30))?;
    let listener = tokio::net::TcpListener::bind(&config.listen).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");

    uuis::gateway::serve(uuis, listener, async {
        let _ = tokio::signal::ctrl_c().await;
        tracing::info!("shutting down");
    })
    .await?;
    if let Some(s) = schedule {
        s.stop();
    }
    Ok(())
}
