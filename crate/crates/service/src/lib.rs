//! HTTP+JSON backend for quiz sessions.
//!
//! Every state change is appended to `events.jsonl` in the data directory
//! before it is acknowledged, and the log is replayed on startup.

pub mod api;
pub mod events;
pub mod store;

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use forestquiz::engine::{Clock, SystemClock};
use forestquiz::forest::Forest;
use forestquiz::quizkit::{validate_quiz, QuizError};
use forestquiz::stats::Cutoff;
use forestquiz::{QuizRunner, QuizSpec};

pub use api::{router, AppState};
pub use store::{IdGenerator, SequentialIds, SessionStore, StoreError, UuidIds};

pub const ADMIN_TOKEN_ENV: &str = "FORESTQUIZ_ADMIN_TOKEN";
pub const EXPORT_SALT_ENV: &str = "FORESTQUIZ_EXPORT_SALT";

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub bind: SocketAddr,
    pub quiz: PathBuf,
    /// When given, the quiz must also cover exactly this forest.
    pub forest: Option<PathBuf>,
    pub data_dir: PathBuf,
    pub cutoff: Cutoff,
    pub admin_token: Option<String>,
    /// Keys handle hashes at intake and respondent ids at export.
    pub export_salt: String,
}

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error(transparent)]
    Quiz(#[from] QuizError),
    #[error("quiz failed validation: {0}")]
    Invalid(String),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("cannot read forest {path}: {message}")]
    Forest { path: PathBuf, message: String },
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl ServiceError {
    pub fn is_validation(&self) -> bool {
        matches!(self, ServiceError::Invalid(_) | ServiceError::Quiz(QuizError::Parse { .. }))
    }
}

/// Loads and checks the quiz, then opens the store.
pub fn open_state(
    config: &ServiceConfig,
    clock: Arc<dyn Clock>,
    ids: Arc<dyn IdGenerator>,
) -> Result<AppState, ServiceError> {
    let spec = load_checked_quiz(&config.quiz, config.forest.as_deref())?;
    let runner = QuizRunner::new(spec).map_err(|e| ServiceError::Invalid(e.to_string()))?;
    let store = SessionStore::open(
        &config.data_dir,
        Arc::new(runner),
        clock,
        ids,
        config.cutoff,
        config.export_salt.clone(),
    )?;
    Ok(AppState {
        store: Arc::new(store),
        admin_token: config.admin_token.clone(),
    })
}

pub fn load_checked_quiz(quiz: &Path, forest: Option<&Path>) -> Result<QuizSpec, ServiceError> {
    let spec = QuizSpec::load(quiz)?;
    let report = match forest {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| ServiceError::Forest {
                path: p.to_path_buf(),
                message: e.to_string(),
            })?;
            let forest: Forest = serde_json::from_str(&text).map_err(|e| ServiceError::Forest {
                path: p.to_path_buf(),
                message: e.to_string(),
            })?;
            validate_quiz(&spec, &forest)
        }
        None => spec.self_check(),
    };
    if !report.pass() {
        return Err(ServiceError::Invalid(serde_json::to_string(&report.failures).expect("serializes")));
    }
    Ok(spec)
}

/// Serves until Ctrl-C.
pub async fn serve(config: ServiceConfig) -> Result<(), ServiceError> {
    let state = open_state(&config, Arc::new(SystemClock), Arc::new(UuidIds))?;
    let listener = tokio::net::TcpListener::bind(config.bind).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
