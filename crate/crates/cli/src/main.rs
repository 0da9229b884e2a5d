//! `wisflow`: check a model directory, scaffold the example project, or
//! serve a model directory over HTTP.

use std::fs;
use std::io::{self, Write};
use std::net::{SocketAddr, TcpListener};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use axum::body::{Body, Bytes};
use axum::extract::State;
use axum::http::{header, HeaderMap, HeaderValue, Method, StatusCode, Uri};
use axum::response::Response;
use axum::Router;
use clap::{Parser, Subcommand};

use wisflow_core::engine::Engine;
use wisflow_core::fixture;
use wisflow_core::httpapi::{Api, ApiRequest};
use wisflow_core::project::{load_dir, load_sources, read_model_files, seed_once, ProjectError, SeedError, SEED_FILE};
use wisflow_core::store::Store;
use wisflow_core::syntax::{Diagnostic, Location};

const MODEL_ERRORS: u8 = 1;
const ENVIRONMENT_ERROR: u8 = 2;

#[derive(Parser)]
#[command(name = "wisflow", version, about = "Model-driven web workflows: check, scaffold, and serve models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and link every model file in a directory.
    Check { dir: PathBuf },
    /// Serve the REST API for a model directory.
    Serve {
        dir: PathBuf,
        /// Port to listen on; 0 picks a free one.
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Data directory; defaults to `<dir>/data`.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
    /// Write the thesis-grading example project into an empty directory.
    Init { dir: PathBuf },
}

fn main() -> ExitCode {
    let code = match Cli::parse().command {
        Command::Check { dir } => check(&dir),
        Command::Serve { dir, port, data, host } => {
            let data = data.unwrap_or_else(|| dir.join("data"));
            serve(&dir, &host, port, &data)
        }
        Command::Init { dir } => init(&dir),
    };
    ExitCode::from(code)
}

fn print_diagnostics(diags: &[Diagnostic]) {
    let mut err = io::stderr().lock();
    for d in diags {
        let _ = writeln!(err, "{d}");
    }
}

fn environment_error(message: impl std::fmt::Display) -> u8 {
    eprintln!("error: {message}");
    ENVIRONMENT_ERROR
}

fn check(dir: &Path) -> u8 {
    if !dir.is_dir() {
        return environment_error(format!("{} is not a directory", dir.display()));
    }
    let files = match read_model_files(dir) {
        Ok(f) => f,
        Err(e) => return environment_error(e),
    };
    let origin = dir.display().to_string();
    match load_sources(&origin, &files) {
        Ok(system) => {
            print_diagnostics(&system.warnings);
            0
        }
        Err(diags) => {
            print_diagnostics(&diags);
            if diags.iter().any(Diagnostic::is_error) {
                MODEL_ERRORS
            } else {
                0
            }
        }
    }
}

fn init(dir: &Path) -> u8 {
    match fs::read_dir(dir) {
        Ok(mut entries) => {
            if entries.next().is_some() {
                return environment_error(format!("{} is not empty", dir.display()));
            }
        }
        Err(e) if e.kind() == io::ErrorKind::NotFound => {}
        Err(e) => return environment_error(format!("{}: {e}", dir.display())),
    }
    if let Err(e) = fixture::write_project(dir) {
        return environment_error(format!("{}: {e}", dir.display()));
    }
    println!("wrote the example project to {}", dir.display());
    0
}

/// Loads `seed.json` on the first start with a fresh data directory.
fn seed(dir: &Path, store: &Store) -> Result<(), u8> {
    match seed_once(store, dir) {
        Ok(Some(n)) => {
            println!("seeded {n} object(s) from {}", dir.join(SEED_FILE).display());
            Ok(())
        }
        Ok(None) => Ok(()),
        Err(e @ SeedError::Io { .. }) => Err(environment_error(e)),
        Err(e) => {
            let location = Location::new(dir.join(SEED_FILE).display().to_string(), 1, 1);
            print_diagnostics(&[Diagnostic::error(location, "seed", e.to_string())]);
            Err(MODEL_ERRORS)
        }
    }
}

fn serve(dir: &Path, host: &str, port: u16, data: &Path) -> u8 {
    let system = match load_dir(dir) {
        Ok(s) => s,
        Err(ProjectError::Invalid(diags)) => {
            print_diagnostics(&diags);
            return MODEL_ERRORS;
        }
        Err(e) => return environment_error(e),
    };
    print_diagnostics(&system.warnings);
    let store = match Store::open(data, system.class_model.clone()) {
        Ok(s) => s,
        Err(e) => return environment_error(format!("{}: {e}", data.display())),
    };
    if let Err(code) = seed(dir, &store) {
        return code;
    }
    let listener = match TcpListener::bind((host, port)) {
        Ok(l) => l,
        Err(e) => return environment_error(format!("cannot listen on {host}:{port}: {e}")),
    };
    let addr = match listener.local_addr() {
        Ok(a) => a,
        Err(e) => return environment_error(e),
    };
    let api = Arc::new(Api::new(Engine::new(system, store)));
    match run_server(listener, addr, api) {
        Ok(()) => 0,
        Err(e) => environment_error(e),
    }
}

fn run_server(listener: TcpListener, addr: SocketAddr, api: Arc<Api>) -> io::Result<()> {
    listener.set_nonblocking(true)?;
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::from_std(listener)?;
        let app = Router::new().fallback(dispatch).with_state(api);
        println!("listening on http://{addr}");
        let _ = io::stdout().flush();
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
    })
}

fn bearer(headers: &HeaderMap) -> Option<String> {
    let value = headers.get(header::AUTHORIZATION)?.to_str().ok()?;
    // a malformed header still reaches the API so it can answer 401
    Some(value.strip_prefix("Bearer ").unwrap_or(value).trim().to_string())
}

/// Every route goes through the transport-independent API.
async fn dispatch(State(api): State<Arc<Api>>, method: Method, uri: Uri, headers: HeaderMap, body: Bytes) -> Response {
    let request = ApiRequest {
        method: method.as_str().to_string(),
        path: uri.path().to_string(),
        bearer: bearer(&headers),
        body: body.to_vec(),
    };
    let handled = tokio::task::spawn_blocking(move || api.handle(&request)).await;
    let Ok(reply) = handled else {
        return plain(StatusCode::INTERNAL_SERVER_ERROR, r#"{"error":"internal","message":"handler failed"}"#);
    };
    let status = StatusCode::from_u16(reply.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    let body = serde_json::to_vec(&reply.body).unwrap_or_default();
    let mut response = Response::new(Body::from(body));
    *response.status_mut() = status;
    let h = response.headers_mut();
    h.insert(header::CONTENT_TYPE, HeaderValue::from_static("application/json"));
    if let Some(location) = reply.location.as_deref().and_then(|l| HeaderValue::from_str(l).ok()) {
        h.insert(header::LOCATION, location);
    }
    response
}

fn plain(status: StatusCode, json: &'static str) -> Response {
    let mut response = Response::new(Body::from(json));
    *response.status_mut() = status;
    response
        .headers_mut()
        .insert(header::CONTENT_TYPE, HeaderValue::from_static("application/json"));
    response
}
