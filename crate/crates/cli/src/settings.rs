//! Flag > config file > environment > default resolution.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, ValueEnum};
use serde::Deserialize;
use webnav::browser::BackendConfig;
use webnav::domain::NavConfig;
use webnav::embeddings::{CachedEmbedder, Embedder, OfflineEmbedder, RemoteEmbedder};
use webnav::llm::{ChatProvider, Gateway, RemoteConfig, RemoteProvider, ScriptedProvider};

use crate::CliError;

pub const ENV_API_KEY: &str = "WEBNAV_API_KEY";
pub const ENV_LLM_ENDPOINT: &str = "WEBNAV_LLM_ENDPOINT";
pub const ENV_EMBED_ENDPOINT: &str = "WEBNAV_EMBED_ENDPOINT";
pub const ENV_EMBED_MODEL: &str = "WEBNAV_EMBED_MODEL";
pub const ENV_WIRE_ENDPOINT: &str = "WEBNAV_WIRE_ENDPOINT";
pub const ENV_STRONG_MODEL: &str = "WEBNAV_STRONG_MODEL";
pub const ENV_CHEAP_MODEL: &str = "WEBNAV_CHEAP_MODEL";

const DEFAULT_WIRE_ENDPOINT: &str = "http://localhost:4444";
const DEFAULT_EMBED_ENDPOINT: &str = "https://api.openai.com/v1/embeddings";
const DEFAULT_EMBED_MODEL: &str = "text-embedding-3-small";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Wire,
    Fixture,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbedderKind {
    Remote,
    Offline,
}

/// Config file: agent fields at the top level next to run options.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub top_k: Option<usize>,
    pub step_limit: Option<usize>,
    pub neighbor_count: Option<usize>,
    pub neighbor_threshold: Option<f64>,
    pub batch_size: Option<usize>,
    pub retrieval_k: Option<usize>,
    pub penalty_factor: Option<f64>,
    pub temperature: Option<f64>,
    pub enable_descriptions: Option<bool>,
    pub enable_planning: Option<bool>,
    pub html_truncation_limit: Option<usize>,
    pub parallel_descriptions: Option<bool>,

    pub tasks: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub backend: Option<Backend>,
    pub wire_endpoint: Option<String>,
    pub fixture_dir: Option<PathBuf>,
    pub llm: Option<String>,
    pub llm_script: Option<PathBuf>,
    pub embedder: Option<EmbedderKind>,
    pub refdb: Option<PathBuf>,
    pub parallel: Option<usize>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }
}

/// Options shared by every subcommand that talks to a model, browser or
/// embedder.
#[derive(Debug, Clone, Default, Args)]
pub struct RuntimeArgs {
    /// TOML file with agent settings and run options.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub backend: Option<Backend>,
    /// WebDriver endpoint (also WEBNAV_WIRE_ENDPOINT).
    #[arg(long)]
    pub wire_endpoint: Option<String>,
    /// Directory of fixture apps, or a single app directory.
    #[arg(long)]
    pub fixture_dir: Option<PathBuf>,
    /// `remote`, `scripted`, or a path to a script file.
    #[arg(long)]
    pub llm: Option<String>,
    #[arg(long)]
    pub llm_script: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub embedder: Option<EmbedderKind>,
    #[arg(long)]
    pub top_k: Option<usize>,
    #[arg(long)]
    pub step_limit: Option<usize>,
    #[arg(long)]
    pub no_descriptions: bool,
    #[arg(long)]
    pub no_planning: bool,
}

/// Everything resolved; nothing has been opened yet.
#[derive(Debug, Clone)]
pub struct Settings {
    pub nav: NavConfig,
    pub file: FileConfigRun,
    pub backend: Backend,
    pub wire_endpoint: String,
    pub fixture_dir: Option<PathBuf>,
    pub llm: LlmChoice,
    pub embedder: EmbedderKind,
}

/// Run options from the config file that individual subcommands consult.
#[derive(Debug, Clone, Default)]
pub struct FileConfigRun {
    pub tasks: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub refdb: Option<PathBuf>,
    pub parallel: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LlmChoice {
    Remote,
    Scripted(PathBuf),
}

fn env(name: &str) -> Option<String> {
    std::env::var(name).ok().filter(|v| !v.is_empty())
}

impl Settings {
    pub fn resolve(args: &RuntimeArgs) -> Result<Self, CliError> {
        let f = FileConfig::load(args.config.as_deref())?;
        let d = NavConfig::default();
        let nav = NavConfig {
            top_k: args.top_k.or(f.top_k).unwrap_or(d.top_k),
            step_limit: args.step_limit.or(f.step_limit).unwrap_or(d.step_limit),
            neighbor_count: f.neighbor_count.unwrap_or(d.neighbor_count),
            neighbor_threshold: f.neighbor_threshold.unwrap_or(d.neighbor_threshold),
            batch_size: f.batch_size.unwrap_or(d.batch_size),
            retrieval_k: f.retrieval_k.unwrap_or(d.retrieval_k),
            penalty_factor: f.penalty_factor.unwrap_or(d.penalty_factor),
            temperature: f.temperature.unwrap_or(d.temperature),
            enable_descriptions: !args.no_descriptions && f.enable_descriptions.unwrap_or(d.enable_descriptions),
            enable_planning: !args.no_planning && f.enable_planning.unwrap_or(d.enable_planning),
            html_truncation_limit: f.html_truncation_limit.unwrap_or(d.html_truncation_limit),
            parallel_descriptions: f.parallel_descriptions.unwrap_or(d.parallel_descriptions),
        };
        nav.validate().map_err(|e| CliError::Usage(e.to_string()))?;

        let llm_raw = args.llm.clone().or(f.llm).unwrap_or_else(|| "remote".into());
        let script = args.llm_script.clone().or(f.llm_script);
        let llm = match llm_raw.as_str() {
            "remote" => LlmChoice::Remote,
            "scripted" => LlmChoice::Scripted(
                script.ok_or_else(|| CliError::Usage("--llm scripted requires --llm-script".into()))?,
            ),
            path => LlmChoice::Scripted(PathBuf::from(path)),
        };
        let backend = args.backend.or(f.backend).unwrap_or(Backend::Wire);
        let fixture_dir = args.fixture_dir.clone().or(f.fixture_dir);
        if backend == Backend::Fixture && fixture_dir.is_none() {
            return Err(CliError::Usage("--backend fixture requires --fixture-dir".into()));
        }
        Ok(Settings {
            nav,
            file: FileConfigRun {
                tasks: f.tasks,
                out: f.out,
                refdb: f.refdb,
                parallel: f.parallel,
            },
            backend,
            wire_endpoint: args
                .wire_endpoint
                .clone()
                .or(f.wire_endpoint)
                .or_else(|| env(ENV_WIRE_ENDPOINT))
                .unwrap_or_else(|| DEFAULT_WIRE_ENDPOINT.into()),
            fixture_dir,
            llm,
            embedder: args.embedder.or(f.embedder).unwrap_or(EmbedderKind::Offline),
        })
    }

    pub fn backend_config(&self) -> BackendConfig {
        match self.backend {
            Backend::Fixture => BackendConfig::Fixture {
                root: self.fixture_dir.clone().expect("checked in resolve"),
            },
            Backend::Wire => BackendConfig::Wire {
                endpoint: self.wire_endpoint.clone(),
                capabilities: serde_json::json!({
                    "alwaysMatch": { "browserName": "chrome", "goog:chromeOptions": { "args": ["--headless=new", "--window-size=1280,1024"] } }
                }),
            },
        }
    }

    pub fn gateway(&self) -> Result<Gateway, CliError> {
        let provider: Arc<dyn ChatProvider> = match &self.llm {
            LlmChoice::Scripted(path) => Arc::new(
                ScriptedProvider::from_file(path)
                    .map_err(|e| CliError::Usage(format!("cannot load script {}: {e}", path.display())))?,
            ),
            LlmChoice::Remote => {
                let d = RemoteConfig::default();
                Arc::new(RemoteProvider::new(RemoteConfig {
                    endpoint: env(ENV_LLM_ENDPOINT).unwrap_or(d.endpoint),
                    api_key: env(ENV_API_KEY),
                    strong_model: env(ENV_STRONG_MODEL).unwrap_or(d.strong_model),
                    cheap_model: env(ENV_CHEAP_MODEL).unwrap_or(d.cheap_model),
                    timeout: d.timeout,
                }))
            }
        };
        Ok(Gateway::new(provider))
    }

    pub fn embedder(&self) -> Arc<dyn Embedder> {
        match self.embedder {
            EmbedderKind::Offline => Arc::new(OfflineEmbedder),
            EmbedderKind::Remote => Arc::new(CachedEmbedder::new(RemoteEmbedder::new(
                env(ENV_EMBED_ENDPOINT).unwrap_or_else(|| DEFAULT_EMBED_ENDPOINT.into()),
                env(ENV_EMBED_MODEL).unwrap_or_else(|| DEFAULT_EMBED_MODEL.into()),
                env(ENV_API_KEY),
            ))),
        }
    }
}
