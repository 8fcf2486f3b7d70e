//! HTTP service for the consent-boundary platform.
//!
//! Every endpoint except `/register` and `/session` needs a bearer token
//! from `POST /session`. Errors are `{"error": code}`; anything the caller
//! may not see is reported exactly like something that does not exist.

pub mod app;
pub mod auth;
pub mod config;
pub mod error;
pub mod store;

use std::net::SocketAddr;
use std::sync::Arc;
use std::thread::JoinHandle;

use consent_core::jsonl::JsonlSink;
use consent_core::notify::{NullTransport, OutboxFile, Transport};
use consent_core::Platform;
use tokio::sync::oneshot;

pub use app::{router, AppState};
pub use config::{ConfigError, ServerConfig};

#[derive(Debug, thiserror::Error)]
pub enum StartError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{what}: {source}")]
    Io {
        what: String,
        #[source]
        source: std::io::Error,
    },
}

fn io(what: impl Into<String>) -> impl FnOnce(std::io::Error) -> StartError {
    let what = what.into();
    move |source| StartError::Io { what, source }
}

/// Builds the application state from configuration, restoring the last
/// snapshot from the data directory when there is one.
pub fn build_state(config: &ServerConfig) -> Result<AppState, StartError> {
    let platform_config = config.platform_config()?;
    let store = match &config.data_dir {
        Some(dir) => Some(store::Store::open(dir).map_err(io(format!("data dir {}", dir.display())))?),
        None => None,
    };
    let snapshot = match &store {
        Some(s) => s.load().map_err(io("loading snapshot"))?,
        None => None,
    };
    let (platform, credentials) = match snapshot {
        Some(snap) => (Platform::restore(platform_config, snap.state), snap.credentials),
        None => (Platform::new(platform_config), Default::default()),
    };
    let transport: Arc<dyn Transport> = match &config.outbox {
        Some(path) => Arc::new(OutboxFile::open(path).map_err(io(format!("outbox {}", path.display())))?),
        None => Arc::new(NullTransport),
    };
    let mut platform = platform.with_transport(transport);
    if let Some(path) = &config.audit_log {
        platform = platform.with_audit_sink(JsonlSink::open(path).map_err(io(format!("audit log {}", path.display())))?);
    }
    Ok(AppState::new(platform, credentials, config.session_request_cap, store))
}

/// Serves until ctrl-c.
pub async fn serve(config: ServerConfig) -> Result<(), StartError> {
    let state = Arc::new(build_state(&config)?);
    let listener = tokio::net::TcpListener::bind(&config.listen)
        .await
        .map_err(io(format!("binding {}", config.listen)))?;
    log::info!("listening on {}", listener.local_addr().map_err(io("local addr"))?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(io("serving"))
}

/// A server running on its own thread, stopped when dropped.
pub struct RunningServer {
    pub addr: SocketAddr,
    pub state: Arc<AppState>,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl RunningServer {
    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }
}

impl Drop for RunningServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

/// Starts `state` on `listen` (use port 0 for any free port) in a
/// background thread.
pub fn spawn(listen: &str, state: AppState) -> Result<RunningServer, StartError> {
    let std_listener = std::net::TcpListener::bind(listen).map_err(io(format!("binding {listen}")))?;
    std_listener.set_nonblocking(true).map_err(io("listener"))?;
    let addr = std_listener.local_addr().map_err(io("local addr"))?;
    let state = Arc::new(state);
    let (tx, rx) = oneshot::channel();
    let app = router(state.clone());
    let thread = std::thread::Builder::new()
        .name("consent-server".into())
        .spawn(move || {
            let rt = tokio::runtime::Builder::new_multi_thread()
                .worker_threads(2)
                .enable_all()
                .build()
                .expect("tokio runtime");
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::from_std(std_listener).expect("tokio listener");
                let _ = axum::serve(listener, app)
                    .with_graceful_shutdown(async {
                        let _ = rx.await;
                    })
                    .await;
            });
        })
        .map_err(io("server thread"))?;
    Ok(RunningServer {
        addr,
        state,
        shutdown: Some(tx),
        thread: Some(thread),
    })
}
