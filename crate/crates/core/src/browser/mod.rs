//! Browser sessions: page observation and action execution.
//!
//! Two backends implement [`BrowserBackend`]: [`wire::WireBackend`] talks to a
//! W3C WebDriver remote end, [`fixture::FixtureBackend`] replays recorded
//! snapshots through a transition table.

pub mod dom;
pub mod fixture;
pub mod wire;

use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Action, ActionableElement, PageState, Screenshot, TextBlock};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BrowserError {
    #[error("browser backend unreachable: {0}")]
    BackendUnreachable(String),
    #[error("unknown fixture app: {0}")]
    UnknownFixtureApp(String),
    #[error("invalid fixture: {0}")]
    InvalidFixture(String),
    #[error("page unavailable: {0}")]
    PageUnavailable(String),
    #[error("screenshot failed: {0}")]
    ScreenshotFailed(String),
    #[error("element not found: {0}")]
    ElementNotFound(String),
    #[error("no fixture transition for {action} on {xpath} in state {state}")]
    NoMatchingTransition {
        state: String,
        xpath: String,
        action: String,
    },
    #[error("action rejected: {0}")]
    ActionRejected(String),
    #[error("session is closed")]
    SessionClosed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Wire,
    Fixture,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BackendConfig {
    Wire {
        endpoint: String,
        capabilities: serde_json::Value,
    },
    /// Either a directory of apps or a single app directory.
    Fixture { root: PathBuf },
}

impl BackendConfig {
    pub fn kind(&self) -> BackendKind {
        match self {
            BackendConfig::Wire { .. } => BackendKind::Wire,
            BackendConfig::Fixture { .. } => BackendKind::Fixture,
        }
    }
}

/// Raw observation before the step index is attached.
#[derive(Debug, Clone)]
pub struct Observation {
    pub url: String,
    pub meta_description: String,
    pub screenshot: Screenshot,
    pub elements: Vec<ActionableElement>,
    pub text_blocks: Vec<TextBlock>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionReport {
    pub navigated: bool,
    pub new_url: String,
}

pub trait BrowserBackend: Send {
    fn current_url(&self) -> String;
    fn observe(&mut self) -> Result<Observation, BrowserError>;
    fn execute(&mut self, action: &Action) -> Result<ExecutionReport, BrowserError>;
    fn close(&mut self) {}
    /// Opaque identifier of the current page state, when the backend has one.
    fn state_token(&self) -> Option<String> {
        None
    }
}

static SESSION_COUNTER: AtomicU64 = AtomicU64::new(0);

/// One open page. Calls are serialized by `&mut self`.
pub struct Session {
    session_id: String,
    backend_kind: BackendKind,
    backend: Box<dyn BrowserBackend>,
    closed: bool,
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session")
            .field("session_id", &self.session_id)
            .field("backend", &self.backend_kind)
            .field("current_url", &self.backend.current_url())
            .field("closed", &self.closed)
            .finish()
    }
}

impl Session {
    pub fn from_backend(kind: BackendKind, backend: Box<dyn BrowserBackend>) -> Self {
        let n = SESSION_COUNTER.fetch_add(1, Ordering::Relaxed);
        let session_id = format!(
            "{}-{n}",
            match kind {
                BackendKind::Wire => "wire",
                BackendKind::Fixture => "fixture",
            }
        );
        Session {
            session_id,
            backend_kind: kind,
            backend,
            closed: false,
        }
    }

    pub fn session_id(&self) -> &str {
        &self.session_id
    }

    pub fn backend_kind(&self) -> BackendKind {
        self.backend_kind
    }

    pub fn current_url(&self) -> String {
        self.backend.current_url()
    }

    pub fn state_token(&self) -> Option<String> {
        self.backend.state_token()
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    /// Read-only observation of the current page.
    pub fn capture_state(&mut self, step_index: usize) -> Result<PageState, BrowserError> {
        if self.closed {
            return Err(BrowserError::SessionClosed);
        }
        let obs = self.backend.observe()?;
        Ok(PageState {
            step_index,
            url: obs.url,
            meta_description: obs.meta_description,
            screenshot: obs.screenshot,
            elements: obs.elements,
            text_blocks: obs.text_blocks,
            context: None,
        })
    }

    pub fn execute(&mut self, action: &Action) -> Result<ExecutionReport, BrowserError> {
        if self.closed {
            return Err(BrowserError::SessionClosed);
        }
        action
            .check_shape()
            .map_err(|e| BrowserError::ActionRejected(e.to_string()))?;
        self.backend.execute(action)
    }

    pub fn close(&mut self) {
        if !self.closed {
            self.backend.close();
            self.closed = true;
        }
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        self.close();
    }
}

/// Opens a session at `start_url`. Fixture URLs have the form `fixture://<app>[/...]`.
pub fn open_session(start_url: &str, config: &BackendConfig) -> Result<Session, BrowserError> {
    match config {
        BackendConfig::Fixture { root } => {
            let backend = fixture::FixtureBackend::open(root, start_url)?;
            Ok(Session::from_backend(BackendKind::Fixture, Box::new(backend)))
        }
        BackendConfig::Wire {
            endpoint,
            capabilities,
        } => {
            let backend = wire::WireBackend::open(endpoint, capabilities.clone(), start_url)?;
            Ok(Session::from_backend(BackendKind::Wire, Box::new(backend)))
        }
    }
}
