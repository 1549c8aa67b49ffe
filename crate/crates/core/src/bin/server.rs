use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use clap::Parser;
use sonotate::{App, Settings};

/// Runs the annotation REST API.
#[derive(Parser)]
#[command(version)]
struct Args {
    #[arg(long, env = "SONOTATE_BIND", default_value = "127.0.0.1:8080")]
    bind: SocketAddr,
    /// Directory holding state.json and the audio/ store.
    #[arg(long, env = "SONOTATE_DATA_DIR", default_value = "./data")]
    data_dir: PathBuf,
    /// Created as an admin on start if absent.
    #[arg(long, env = "SONOTATE_ADMIN_USERNAME")]
    admin_username: Option<String>,
    #[arg(long, env = "SONOTATE_ADMIN_PASSWORD", hide_env_values = true)]
    admin_password: Option<String>,
    #[arg(long, env = "SONOTATE_SESSION_TTL_SECS", default_value_t = 24 * 3600)]
    session_ttl_secs: i64,
    /// Hex HMAC key for bearer tokens; random per start when unset.
    #[arg(long, env = "SONOTATE_TOKEN_SECRET", hide_env_values = true)]
    token_secret: Option<String>,
    #[arg(long, env = "SONOTATE_MAX_UPLOAD_BYTES", default_value_t = sonotate::app::DEFAULT_MAX_UPLOAD_BYTES)]
    max_upload_bytes: u64,
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .init();
    let args = Args::parse();

    let token_secret = args.token_secret.as_deref().map(hex::decode).transpose()?;
    let settings = Settings {
        session_ttl: chrono::Duration::seconds(args.session_ttl_secs),
        token_secret,
        max_upload_bytes: args.max_upload_bytes,
        ..Settings::default()
    };
    let app = App::builder().settings(settings).data_dir(&args.data_dir).build()?;
    match (&args.admin_username, &args.admin_password) {
        (Some(user), Some(pw)) => {
            app.bootstrap_admin(user, pw)?;
        }
        (None, None) => {}
        _ => return Err("admin username and password must be given together".into()),
    }

    let listener = tokio::net::TcpListener::bind(args.bind).await?;
    tracing::info!(addr = %listener.local_addr()?, data_dir = %args.data_dir.display(), "listening");
    axum::serve(listener, sonotate::http::router(Arc::new(app)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
