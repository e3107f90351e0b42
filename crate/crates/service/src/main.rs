use std::process::ExitCode;
use std::time::Duration;

use clap::Parser;
use hyb_service::{router, ServiceConfig};

/// Serves the hybrid-program evaluators over HTTP.
#[derive(Parser, Debug)]
#[command(name = "hyb-serve", version)]
struct Args {
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    /// Origin allowed to call the API from a browser; any origin if omitted.
    #[arg(long)]
    cors_origin: Option<String>,
    /// Wall-clock budget per request, in milliseconds.
    #[arg(long, default_value_t = 5000)]
    timeout_ms: u64,
    /// Requests evaluated concurrently; more get 429. Defaults to the CPU count.
    #[arg(long)]
    workers: Option<usize>,
}

#[tokio::main]
async fn main() -> ExitCode {
    let args = Args::parse();
    let mut cfg = ServiceConfig {
        timeout: Duration::from_millis(args.timeout_ms),
        cors_origin: args.cors_origin,
        ..ServiceConfig::default()
    };
    if let Some(w) = args.workers {
        cfg.workers = w.max(1);
    }
    let app = match router(&cfg) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("hyb-serve: {e}");
            return ExitCode::from(2);
        }
    };
    let addr = format!("{}:{}", args.host, args.port);
    let listener = match tokio::net::TcpListener::bind(&addr).await {
        Ok(l) => l,
        Err(e) => {
            eprintln!("hyb-serve: cannot bind {addr}: {e}");
            return ExitCode::from(1);
        }
    };
    eprintln!("hyb-serve: listening on http://{addr}");
    if let Err(e) = axum::serve(listener, app).await {
        eprintln!("hyb-serve: {e}");
        return ExitCode::from(1);
    }
    ExitCode::SUCCESS
}
