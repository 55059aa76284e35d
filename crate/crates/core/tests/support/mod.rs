//! Shared helpers and independent brute-force oracles for integration tests.
//! Oracles deliberately avoid the production scoring and retrieval code.
#![allow(dead_code)]

pub mod oracles;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use webnav::browser::BackendConfig;
use webnav::domain::{NavConfig, TaskSpec};
use webnav::embeddings::OfflineEmbedder;
use webnav::fixtures::bundled_root;
use webnav::llm::{Gateway, ScriptEntry, ScriptedProvider};
use webnav::navigator::{Navigator, RunResult};

pub fn apps_root() -> PathBuf {
    bundled_root().join("apps")
}

pub fn load_script(name: &str) -> Vec<ScriptEntry> {
    let p = bundled_root().join("scripts").join(format!("{name}.json"));
    serde_json::from_slice(&std::fs::read(p).unwrap()).unwrap()
}

pub fn load_tasks(name: &str) -> Vec<TaskSpec> {
    let p = bundled_root().join("tasks").join(format!("{name}.json"));
    serde_json::from_slice(&std::fs::read(p).unwrap()).unwrap()
}

pub fn navigator(script: Vec<ScriptEntry>, config: NavConfig) -> (Navigator, Arc<ScriptedProvider>) {
    let provider = Arc::new(ScriptedProvider::new(script));
    let nav = Navigator {
        gateway: Gateway::new(provider.clone()),
        embedder: Arc::new(OfflineEmbedder),
        backend: BackendConfig::Fixture { root: apps_root() },
        config,
    };
    (nav, provider)
}

pub fn run(script: Vec<ScriptEntry>, task: &TaskSpec, config: NavConfig, out: &Path) -> RunResult {
    let (nav, _) = navigator(script, config);
    nav.run(task, None, out).unwrap()
}
