//! Session-oriented planning service.
//!
//! A session loads one dataset, then walks through choosing K, building
//! regional clusters, picking stops and comparing candidate routes. Every
//! state change is logged so sessions survive a restart.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod error;
pub mod events;
pub mod http;
pub mod session;

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use dataset::{Dataset, DatasetRef, DEFAULT_DRIVE_SPEED_MPS};
use error::ApiError;
use events::EventLog;
use session::{Event, Session};
use shuttle_core::regional::DEFAULT_THRESHOLD_M;
use shuttle_core::routing::DEFAULT_WALK_SPEED_MPS;

pub use http::router;

#[derive(Clone, Debug)]
pub struct Config {
    pub data_dir: PathBuf,
    pub walk_speed_mps: f64,
    pub drive_speed_mps: f64,
    pub threshold_default_m: f64,
    pub session_log_dir: Option<PathBuf>,
}

impl Config {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        Self {
            data_dir: data_dir.into(),
            walk_speed_mps: DEFAULT_WALK_SPEED_MPS,
            drive_speed_mps: DEFAULT_DRIVE_SPEED_MPS,
            threshold_default_m: DEFAULT_THRESHOLD_M,
            session_log_dir: None,
        }
    }
}

pub type SessionHandle = Arc<Mutex<Session>>;

pub struct AppState {
    pub config: Config,
    sessions: RwLock<HashMap<String, SessionHandle>>,
    datasets: Mutex<HashMap<String, Arc<Dataset>>>,
    log: Option<EventLog>,
}

impl AppState {
    /// Opens the event log, if configured, and replays every session in it.
    pub fn new(config: Config) -> std::io::Result<Arc<Self>> {
        let log = config.session_log_dir.as_deref().map(EventLog::open).transpose()?;
        let state = Arc::new(Self {
            config,
            sessions: RwLock::new(HashMap::new()),
            datasets: Mutex::new(HashMap::new()),
            log,
        });
        if let Some(log) = &state.log {
            for (id, events) in log.sessions()? {
                match state.replay(&id, &events) {
                    Ok(s) => {
                        tracing::info!(session = %id, revision = s.revision, "replayed session");
                        state.sessions.write().unwrap().insert(id, Arc::new(Mutex::new(s)));
                    }
                    Err(e) => tracing::warn!(session = %id, error = %e, "could not replay session"),
                }
            }
        }
        Ok(state)
    }

    fn replay(&self, id: &str, events: &[Event]) -> Result<Session, ApiError> {
        let Some((Event::Create { dataset }, rest)) = events.split_first() else {
            return Err(ApiError::bad_request("log does not start with a create event"));
        };
        let mut s = Session::new(id.to_string(), dataset.clone(), self.dataset(dataset)?);
        for e in rest {
            s.apply(e)?;
        }
        Ok(s)
    }

    /// Loads a dataset, sharing it between sessions that name the same files.
    pub fn dataset(&self, r: &DatasetRef) -> Result<Arc<Dataset>, ApiError> {
        let key = serde_json::to_string(r).expect("dataset ref serializes");
        if let Some(d) = self.datasets.lock().unwrap().get(&key) {
            return Ok(d.clone());
        }
        let progress = |done: usize, total: usize| {
            if done == total || done.is_multiple_of((total / 10).max(1)) {
                tracing::info!(done, total, "walking matrix rows");
            }
        };
        let d = Arc::new(Dataset::load(
            r,
            &self.config.data_dir,
            self.config.walk_speed_mps,
            self.config.drive_speed_mps,
            &progress,
        )?);
        self.datasets.lock().unwrap().insert(key, d.clone());
        Ok(d)
    }

    pub fn create_session(&self, r: DatasetRef) -> Result<SessionHandle, ApiError> {
        let data = self.dataset(&r)?;
        let id = uuid::Uuid::new_v4().simple().to_string();
        self.record(&id, &Event::Create { dataset: r.clone() })?;
        let handle = Arc::new(Mutex::new(Session::new(id.clone(), r, data)));
        self.sessions.write().unwrap().insert(id, handle.clone());
        Ok(handle)
    }

    pub fn session(&self, id: &str) -> Result<SessionHandle, ApiError> {
        self.sessions
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::unknown_session(id))
    }

    pub fn record(&self, id: &str, event: &Event) -> Result<(), ApiError> {
        if let Some(log) = &self.log {
            log.append(id, event).map_err(|e| {
                ApiError::new(
                    axum::http::StatusCode::INTERNAL_SERVER_ERROR,
                    "log_write_failed",
                    e.to_string(),
                )
            })?;
        }
        Ok(())
    }

    pub fn snapshot(&self, id: &str, bundle: &[u8]) {
        if let Some(log) = &self.log {
            if let Err(e) = log.snapshot(id, bundle) {
                tracing::warn!(session = %id, error = %e, "export snapshot not written");
            }
        }
    }

    pub fn data_dir(&self) -> &Path {
        &self.config.data_dir
    }
}
