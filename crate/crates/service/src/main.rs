use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Parser, ValueEnum};
use ivl_core::amr::io as dsio;
use ivl_core::ExecMode;
use ivl_service::{router, Session, Settings};
use tower_http::cors::CorsLayer;
use tower_http::trace::{DefaultMakeSpan, DefaultOnResponse, TraceLayer};
use tracing::Level;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ExecArg {
    Sequential,
    Parallel,
}

#[derive(Debug, Parser)]
#[command(name = "ivl-service", version, about = "Interactive volume-line session service")]
struct Args {
    #[arg(long, env = "IVL_HOST", default_value = "127.0.0.1")]
    host: std::net::IpAddr,
    #[arg(long, env = "IVL_PORT", default_value_t = 8080)]
    port: u16,
    /// Worker threads for the pipeline; defaults to all cores.
    #[arg(long, env = "IVL_THREADS")]
    threads: Option<usize>,
    /// Plot width for newly loaded datasets.
    #[arg(long, env = "IVL_WIDTH", default_value_t = 1024)]
    width: usize,
    #[arg(long, env = "IVL_EXEC", value_enum, default_value_t = ExecArg::Parallel)]
    exec: ExecArg,
    /// Dataset to load at startup.
    #[arg(long, env = "IVL_DATASET")]
    dataset: Option<PathBuf>,
    #[arg(long, env = "IVL_MAX_UPLOAD_MB", default_value_t = 4096)]
    max_upload_mb: usize,
    /// Allow cross-origin requests from any origin.
    #[arg(long, env = "IVL_CORS")]
    cors: bool,
    #[arg(long, env = "IVL_LOG", default_value = "info")]
    log: Level,
}

#[tokio::main]
async fn main() -> Result<()> {
    let args = Args::parse();
    tracing_subscriber::fmt().with_max_level(args.log).init();
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring thread pool")?;
    }

    let settings = Settings {
        default_width: args.width,
        exec: match args.exec {
            ExecArg::Sequential => ExecMode::Sequential,
            ExecArg::Parallel => ExecMode::Parallel,
        },
        ..Settings::default()
    };
    ivl_core::PipelineParams { width: settings.default_width, ..Default::default() }
        .validate()
        .context("--width")?;
    let session = Arc::new(Session::new(settings));
    if let Some(path) = &args.dataset {
        let ds = dsio::load(path).with_context(|| format!("loading {}", path.display()))?;
        let s = session.load(ds);
        tracing::info!(cells = s.cells, fields = s.fields, "loaded {}", path.display());
    }

    let trace = TraceLayer::new_for_http()
        .make_span_with(DefaultMakeSpan::new().level(Level::INFO))
        .on_response(DefaultOnResponse::new().level(Level::INFO));
    let mut app = router(session, args.max_upload_mb.saturating_mul(1 << 20)).layer(trace);
    if args.cors {
        app = app.layer(CorsLayer::permissive());
    }
    let addr = SocketAddr::new(args.host, args.port);
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .with_context(|| format!("binding {addr}"))?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
