use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use shuttle_core::ingestion::{generate_synthetic, SyntheticSpec};
use shuttle_service::{router, AppState, Config};
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "shuttleplan", version, about = "Night shuttle route planning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the planning API.
    Serve {
        #[arg(long, env = "SHUTTLEPLAN_PORT", default_value_t = 8080)]
        port: u16,
        #[arg(long, env = "SHUTTLEPLAN_BIND", default_value = "127.0.0.1")]
        bind: std::net::IpAddr,
        /// Relative dataset paths resolve against this directory.
        #[arg(long, env = "SHUTTLEPLAN_DATA_DIR", default_value = ".")]
        data_dir: PathBuf,
        #[arg(long, env = "SHUTTLEPLAN_WALK_SPEED", default_value_t = shuttle_core::routing::DEFAULT_WALK_SPEED_MPS)]
        walk_speed: f64,
        #[arg(long, env = "SHUTTLEPLAN_DRIVE_SPEED", default_value_t = shuttle_service::dataset::DEFAULT_DRIVE_SPEED_MPS)]
        drive_speed: f64,
        /// Default walking threshold for regional clusters, meters.
        #[arg(long, env = "SHUTTLEPLAN_THRESHOLD", default_value_t = shuttle_core::regional::DEFAULT_THRESHOLD_M)]
        threshold_default: f64,
        /// Keep an event log per session here and replay it on startup.
        #[arg(long, env = "SHUTTLEPLAN_SESSION_LOG_DIR")]
        session_log_dir: Option<PathBuf>,
    },
    /// Write a synthetic dataset with planted structure.
    Generate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// JSON generator spec; fields left out take their defaults.
        #[arg(long)]
        spec: Option<PathBuf>,
    },
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .init();
    match Cli::parse().command {
        Command::Serve { port, bind, data_dir, walk_speed, drive_speed, threshold_default, session_log_dir } => {
            let config = Config {
                data_dir,
                walk_speed_mps: walk_speed,
                drive_speed_mps: drive_speed,
                threshold_default_m: threshold_default,
                session_log_dir,
            };
            let state = tokio::task::spawn_blocking(move || AppState::new(config)).await??;
            let addr = SocketAddr::new(bind, port);
            let listener = tokio::net::TcpListener::bind(addr).await?;
            tracing::info!(%addr, "listening");
            axum::serve(listener, router(state)).await?;
        }
        Command::Generate { out, seed, spec } => {
            let spec: SyntheticSpec = match spec {
                Some(p) => serde_json::from_reader(std::io::BufReader::new(std::fs::File::open(p)?))?,
                None => SyntheticSpec::default(),
            };
            let data = generate_synthetic(&spec, seed)?;
            data.write_to_dir(&out)?;
            println!(
                "wrote {} trips, {} spots and {} profiles to {}",
                data.trips.len(),
                data.metadata.spots.len(),
                data.profiles.len(),
                out.display()
            );
        }
    }
    Ok(())
}
