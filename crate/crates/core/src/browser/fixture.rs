//! Offline backend replaying recorded page snapshots.
//!
//! App directory layout:
//!
//! ```text
//! <app>/transitions.json   app name, initial state, state urls, transition table
//! <app>/geometry.json      state id -> xpath -> bbox
//! <app>/states/<id>.html
//! <app>/screenshots/<id>.png
//! ```

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use scraper::Html;
use serde::{Deserialize, Serialize};

use super::dom;
use super::{BrowserBackend, BrowserError, ExecutionReport, Observation};
use crate::domain::{Action, ActionInput, ActionType, BBox, Screenshot};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateEntry {
    pub id: String,
    pub url: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub from: String,
    pub xpath: String,
    pub action: ActionType,
    /// `None` or `"*"` matches any input; otherwise a case-insensitive match
    /// against the typed text or the decimal option index.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_pattern: Option<String>,
    pub to: String,
}

impl Transition {
    fn accepts(&self, action: &Action) -> bool {
        if self.xpath != action.element_xpath || self.action != action.action_type {
            return false;
        }
        match self.input_pattern.as_deref() {
            None | Some("*") => true,
            Some(p) => match &action.input {
                Some(ActionInput::Text(t)) => t.trim().eq_ignore_ascii_case(p.trim()),
                Some(ActionInput::Index(i)) => p.trim() == i.to_string(),
                None => false,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionsFile {
    pub app: String,
    pub initial_state: String,
    pub states: Vec<StateEntry>,
    pub transitions: Vec<Transition>,
}

pub type GeometryFile = BTreeMap<String, BTreeMap<String, BBox>>;

/// One recorded page state.
#[derive(Debug, Clone)]
pub struct FixtureSnapshot {
    pub state_id: String,
    pub url: String,
    pub html: String,
    pub meta_description: String,
    pub element_geometry: HashMap<String, BBox>,
    pub screenshot: Vec<u8>,
    pub transitions: Vec<Transition>,
}

#[derive(Debug, Clone)]
pub struct FixtureApp {
    pub name: String,
    pub dir: PathBuf,
    pub initial_state: String,
    pub snapshots: HashMap<String, FixtureSnapshot>,
}

fn read(path: &Path) -> Result<Vec<u8>, BrowserError> {
    std::fs::read(path).map_err(|e| BrowserError::InvalidFixture(format!("{}: {e}", path.display())))
}

impl FixtureApp {
    pub fn load(dir: &Path) -> Result<Self, BrowserError> {
        let tpath = dir.join("transitions.json");
        if !tpath.is_file() {
            return Err(BrowserError::UnknownFixtureApp(format!(
                "{} has no transitions.json",
                dir.display()
            )));
        }
        let tfile: TransitionsFile = serde_json::from_slice(&read(&tpath)?)
            .map_err(|e| BrowserError::InvalidFixture(format!("transitions.json: {e}")))?;
        let geometry: GeometryFile = serde_json::from_slice(&read(&dir.join("geometry.json"))?)
            .map_err(|e| BrowserError::InvalidFixture(format!("geometry.json: {e}")))?;

        let mut snapshots = HashMap::new();
        for state in &tfile.states {
            let html = String::from_utf8(read(&dir.join("states").join(format!("{}.html", state.id)))?)
                .map_err(|e| BrowserError::InvalidFixture(e.to_string()))?;
            let screenshot = read(&dir.join("screenshots").join(format!("{}.png", state.id)))?;
            let element_geometry: HashMap<String, BBox> = geometry
                .get(&state.id)
                .map(|g| g.iter().map(|(k, v)| (k.clone(), *v)).collect())
                .unwrap_or_default();
            let meta_description = dom::meta_description(&Html::parse_document(&html));
            let transitions: Vec<Transition> = tfile
                .transitions
                .iter()
                .filter(|t| t.from == state.id)
                .cloned()
                .collect();
            for t in &transitions {
                if !element_geometry.contains_key(&t.xpath) {
                    return Err(BrowserError::InvalidFixture(format!(
                        "transition from {} targets {} which has no geometry",
                        state.id, t.xpath
                    )));
                }
            }
            snapshots.insert(
                state.id.clone(),
                FixtureSnapshot {
                    state_id: state.id.clone(),
                    url: state.url.clone(),
                    html,
                    meta_description,
                    element_geometry,
                    screenshot,
                    transitions,
                },
            );
        }
        if !snapshots.contains_key(&tfile.initial_state) {
            return Err(BrowserError::InvalidFixture(format!(
                "initial state {} is not declared",
                tfile.initial_state
            )));
        }
        for t in &tfile.transitions {
            if !snapshots.contains_key(&t.from) || !snapshots.contains_key(&t.to) {
                return Err(BrowserError::InvalidFixture(format!(
                    "transition {} -> {} references an undeclared state",
                    t.from, t.to
                )));
            }
        }
        Ok(FixtureApp {
            name: tfile.app,
            dir: dir.to_path_buf(),
            initial_state: tfile.initial_state,
            snapshots,
        })
    }
}

/// `fixture://mini-shop/anything` -> `mini-shop`.
pub fn app_name_from_url(url: &str) -> Option<&str> {
    let rest = url.strip_prefix("fixture://")?;
    let name = rest.split('/').next()?;
    (!name.is_empty()).then_some(name)
}

pub struct FixtureBackend {
    app: FixtureApp,
    state: String,
}

impl FixtureBackend {
    /// Resolves the app from `root` itself (single app dir) or from
    /// `root/<app>` where `<app>` comes from a `fixture://` start url.
    pub fn open(root: &Path, start_url: &str) -> Result<Self, BrowserError> {
        if !root.is_dir() {
            return Err(BrowserError::BackendUnreachable(format!(
                "fixture directory {} is not readable",
                root.display()
            )));
        }
        let dir = if root.join("transitions.json").is_file() {
            root.to_path_buf()
        } else {
            let name = app_name_from_url(start_url).ok_or_else(|| {
                BrowserError::UnknownFixtureApp(format!("cannot resolve an app from {start_url}"))
            })?;
            root.join(name)
        };
        let app = FixtureApp::load(&dir)?;
        let state = app.initial_state.clone();
        Ok(FixtureBackend { app, state })
    }

    /// Jumps straight to `state`; used to inspect one snapshot in isolation.
    pub fn at_state(mut self, state: &str) -> Result<Self, BrowserError> {
        if !self.app.snapshots.contains_key(state) {
            return Err(BrowserError::InvalidFixture(format!("unknown state {state}")));
        }
        self.state = state.to_string();
        Ok(self)
    }

    pub fn app(&self) -> &FixtureApp {
        &self.app
    }

    fn snapshot(&self) -> &FixtureSnapshot {
        &self.app.snapshots[&self.state]
    }
}

impl BrowserBackend for FixtureBackend {
    fn current_url(&self) -> String {
        self.snapshot().url.clone()
    }

    fn observe(&mut self) -> Result<Observation, BrowserError> {
        let snap = self.snapshot();
        let screenshot = Screenshot::from_png(snap.screenshot.clone())
            .map_err(|e| BrowserError::ScreenshotFailed(e.to_string()))?;
        let doc = Html::parse_document(&snap.html);
        let (elements, text_blocks) = dom::analyze(&doc, &snap.element_geometry);
        Ok(Observation {
            url: snap.url.clone(),
            meta_description: snap.meta_description.clone(),
            screenshot,
            elements,
            text_blocks,
        })
    }

    fn execute(&mut self, action: &Action) -> Result<ExecutionReport, BrowserError> {
        let snap = self.snapshot();
        if !snap.element_geometry.contains_key(&action.element_xpath) {
            return Err(BrowserError::ElementNotFound(action.element_xpath.clone()));
        }
        if let (ActionType::Select, Some(ActionInput::Index(i))) = (action.action_type, &action.input) {
            let doc = Html::parse_document(&snap.html);
            let target = dom::walk(&doc)
                .into_iter()
                .find(|n| n.xpath == action.element_xpath)
                .ok_or_else(|| BrowserError::ElementNotFound(action.element_xpath.clone()))?;
            if target.element.value().name() != "select" {
                return Err(BrowserError::ActionRejected("select on a non-select element".into()));
            }
            let n = dom::select_options(target.element).len();
            if *i as usize >= n {
                return Err(BrowserError::ActionRejected(format!(
                    "option index {i} out of range for {n} options"
                )));
            }
        }
        let next = snap
            .transitions
            .iter()
            .find(|t| t.accepts(action))
            .map(|t| t.to.clone())
            .ok_or_else(|| BrowserError::NoMatchingTransition {
                state: self.state.clone(),
                xpath: action.element_xpath.clone(),
                action: action.action_type.to_string(),
            })?;
        let before = self.current_url();
        self.state = next;
        let new_url = self.current_url();
        Ok(ExecutionReport {
            navigated: before != new_url,
            new_url,
        })
    }

    fn state_token(&self) -> Option<String> {
        Some(self.state.clone())
    }
}
