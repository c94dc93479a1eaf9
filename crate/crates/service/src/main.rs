use std::net::SocketAddr;
use std::path::PathBuf;

use clap::Parser;
use skg_core::ScorerKind;
use skg_service::{serve, ServiceConfig};

/// Serve an skg index over HTTP.
#[derive(Debug, Parser)]
#[command(name = "skg-serve", version)]
struct Args {
    /// JSON config file; command-line flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    listen: Option<SocketAddr>,
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long)]
    depth_cap: Option<usize>,
    #[arg(long)]
    default_scorer: Option<ScorerKind>,
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .init();
    let args = Args::parse();
    let mut config = match &args.config {
        Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
        None => ServiceConfig::new(args.data_dir.clone().unwrap_or_else(|| PathBuf::from("skg-data"))),
    };
    if let Some(v) = args.listen {
        config.listen = v;
    }
    if let Some(v) = args.data_dir {
        config.data_dir = v;
    }
    if let Some(v) = args.schema {
        config.schema_file = Some(v);
    }
    if let Some(v) = args.depth_cap {
        config.depth_cap = v;
    }
    if let Some(v) = args.default_scorer {
        config.default_scorer = v;
    }
    serve(config).await
}
