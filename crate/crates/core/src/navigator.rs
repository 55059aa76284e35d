//! One navigation run: optional concretization, then the per-step
//! plan → extract → decide → execute loop until a stopping rule fires.
//!
//! Trace layout under the run directory:
//!
//! ```text
//! trajectory.json  transcript.jsonl
//! step_000/ screenshot.png annotated.png annotation.json context.json
//!           next_step.txt choices.json action.json
//! final_screenshot.png final_context.json final_next_step.txt final_choices.json
//! ```
//!
//! `step_NNN` directories exist for executed actions only; the observation
//! that ended the run is stored under the `final_` names.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::browser::{open_session, BackendConfig, BrowserError, Session};
use crate::choices::{self, RankedChoices};
use crate::decider::{self, Decision};
use crate::domain::{
    Action, HistoryEntry, NavConfig, NextStep, PageState, TaskKind, TaskSpec, Termination, Trajectory,
    WebpageContext,
};
use crate::embeddings::Embedder;
use crate::fsutil::write_atomic;
use crate::llm::Gateway;
use crate::planner::{self, ReferenceDb};

#[derive(Debug, Error)]
pub enum NavError {
    #[error("invalid task: {0}")]
    InvalidTask(String),
    #[error("a reference database is required for functionality task {0}")]
    MissingReferenceDb(String),
    #[error("concretization failed: {0}")]
    Concretization(String),
    #[error(transparent)]
    Browser(#[from] BrowserError),
    #[error("trace i/o: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub trajectory: Trajectory,
    pub concretized_task: Option<String>,
    pub step_count: usize,
    pub trace_dir: PathBuf,
    /// Fixture state (or other backend token) when the run ended.
    pub final_state: Option<String>,
}

/// Stopping rules in priority order: Done, no actions, step limit.
pub fn should_stop(next_step: &NextStep, choices: &RankedChoices, step_index: usize, config: &NavConfig) -> Option<Termination> {
    if next_step.is_done() {
        Some(Termination::Done)
    } else if choices.is_empty() {
        Some(Termination::NoActions)
    } else if step_index >= config.step_limit {
        Some(Termination::StepLimit)
    } else {
        None
    }
}

pub struct Navigator {
    pub gateway: Gateway,
    pub embedder: Arc<dyn Embedder>,
    pub backend: BackendConfig,
    pub config: NavConfig,
}

struct TraceWriter {
    dir: PathBuf,
}

impl TraceWriter {
    fn write(&self, rel: &str, bytes: &[u8]) -> Result<(), NavError> {
        let p = self.dir.join(rel);
        write_atomic(&p, bytes).map_err(|e| NavError::Io(format!("{}: {e}", p.display())))
    }

    fn json(&self, rel: &str, v: &impl Serialize) -> Result<(), NavError> {
        let mut s = serde_json::to_string_pretty(v).expect("trace json");
        s.push('\n');
        self.write(rel, s.as_bytes())
    }

    /// Observation, plan and ranking of one step under `prefix`.
    fn observation(
        &self,
        prefix: &str,
        state: &PageState,
        context: Option<&WebpageContext>,
        next_step: &NextStep,
        ranked: Option<&RankedChoices>,
    ) -> Result<(), NavError> {
        self.write(&format!("{prefix}screenshot.png"), &state.screenshot.png)?;
        if let Some(c) = context {
            self.json(&format!("{prefix}context.json"), c)?;
        }
        self.write(&format!("{prefix}next_step.txt"), format!("{next_step}\n").as_bytes())?;
        if let Some(r) = ranked {
            self.json(&format!("{prefix}choices.json"), &r.items)?;
        }
        Ok(())
    }
}

/// Per-step failure; ends the run with `termination = error`.
#[derive(Debug)]
struct StepFailure(String);

impl<E: std::fmt::Display> From<E> for StepFailure {
    fn from(e: E) -> Self {
        StepFailure(e.to_string())
    }
}

struct Loop<'a> {
    nav: &'a Navigator,
    gateway: &'a Gateway,
    session: Session,
    trace: TraceWriter,
    task_text: String,
    records: Vec<Action>,
    history: Vec<HistoryEntry>,
    selection_counts: HashMap<String, u32>,
    previous_context: Option<WebpageContext>,
}

impl Loop<'_> {
    fn run(&mut self) -> Result<Termination, StepFailure> {
        let cfg = &self.nav.config;
        for step_index in 0.. {
            let state = self.session.capture_state(step_index)?;
            let (context, next_step) = if cfg.enable_planning {
                let ctx = planner::generate_context(
                    self.gateway,
                    &state.meta_description,
                    self.previous_context.as_ref(),
                    self.history.last(),
                    &state.screenshot,
                    cfg.temperature,
                )?;
                let next = planner::predict_next_step(self.gateway, &self.task_text, &self.history, &ctx, cfg.temperature)?;
                (Some(ctx), next)
            } else {
                (None, NextStep::Step(self.task_text.clone()))
            };
            if next_step.is_done() {
                self.trace.observation("final_", &state, context.as_ref(), &next_step, None)?;
                return Ok(Termination::Done);
            }
            let prepared = choices::prepare(&state.elements, cfg.html_truncation_limit);
            let ranked = choices::score_choices(
                &prepared,
                &next_step,
                &self.selection_counts,
                self.nav.embedder.as_ref(),
                cfg,
            )?;
            if let Some(stop) = should_stop(&next_step, &ranked, step_index, cfg) {
                self.trace.observation("final_", &state, context.as_ref(), &next_step, Some(&ranked))?;
                return Ok(stop);
            }
            let ranked = choices::attach_all_neighbors(&ranked, &state.text_blocks, cfg);
            let ranked = choices::describe_choices(&ranked, self.gateway, cfg)?;

            let prefix = format!("step_{step_index:03}/");
            self.trace.observation(&prefix, &state, context.as_ref(), &next_step, Some(&ranked))?;
            let (annotated, manifest) = decider::annotate_screenshot(&state.screenshot, &ranked)?;
            self.trace.write(&format!("{prefix}annotated.png"), &annotated.png)?;
            self.trace.json(&format!("{prefix}annotation.json"), &manifest)?;

            let choice = decider::select_action(
                self.gateway,
                &Decision {
                    task: &self.task_text,
                    next_step: cfg.enable_planning.then_some(&next_step),
                    history: &self.history,
                    ranked: &ranked,
                    annotated: &annotated,
                    temperature: cfg.temperature,
                },
            )?;
            let action = decider::ground(&choice, &ranked);
            debug_assert!(ranked.contains_xpath(&action.element_xpath));
            self.trace.json(&format!("{prefix}action.json"), &action)?;
            self.session.execute(&action)?;

            *self.selection_counts.entry(action.element_xpath.clone()).or_insert(0) += 1;
            self.history.push(HistoryEntry {
                action: action.clone(),
                label: ranked.items[choice.index].label(),
            });
            self.records.push(action);
            self.previous_context = context;
        }
        unreachable!("the step loop only exits by returning")
    }
}

impl Navigator {
    /// Runs `task` to termination, writing traces below `trace_dir`. Setup
    /// failures return `Err`; failures inside a step end the run with
    /// `termination = error`, and the trajectory is persisted either way.
    pub fn run(&self, task: &TaskSpec, db: Option<&ReferenceDb>, trace_dir: &Path) -> Result<RunResult, NavError> {
        task.validate().map_err(|e| NavError::InvalidTask(e.to_string()))?;
        self.config.validate().map_err(|e| NavError::InvalidTask(e.to_string()))?;
        let gateway = self.gateway.with_fresh_transcript();

        let concretized_task = match task.kind {
            TaskKind::Concrete => None,
            TaskKind::Functionality => {
                let db = db.ok_or_else(|| NavError::MissingReferenceDb(task.id.clone()))?;
                let retrieved = planner::retrieve_similar(
                    &task.description,
                    db,
                    self.embedder.as_ref(),
                    self.config.retrieval_k,
                )
                .map_err(|e| NavError::Concretization(e.to_string()))?;
                let c = planner::concretize(
                    &gateway,
                    &task.website_name,
                    &task.description,
                    &retrieved,
                    self.config.temperature,
                )
                .map_err(|e| NavError::Concretization(e.to_string()))?;
                Some(c)
            }
        };

        let session = open_session(&task.start_url, &self.backend)?;
        let trace = TraceWriter {
            dir: trace_dir.to_path_buf(),
        };
        let mut lp = Loop {
            nav: self,
            gateway: &gateway,
            session,
            trace,
            task_text: concretized_task.clone().unwrap_or_else(|| task.description.clone()),
            records: Vec::new(),
            history: Vec::new(),
            selection_counts: HashMap::new(),
            previous_context: None,
        };
        let (termination, error_detail) = match lp.run() {
            Ok(t) => (t, None),
            Err(StepFailure(m)) => {
                log::error!("task {} failed at step {}: {m}", task.id, lp.records.len());
                (Termination::Error, Some(m))
            }
        };
        let final_state = lp.session.state_token();
        lp.session.close();

        let trajectory = Trajectory {
            task_id: task.id.clone(),
            task: task.description.clone(),
            concretized_task: concretized_task.clone(),
            termination,
            error_detail,
            records: lp.records,
        };
        lp.trace.write("trajectory.json", trajectory.to_json().as_bytes())?;
        lp.trace.write("transcript.jsonl", gateway.transcript_jsonl().as_bytes())?;
        log::info!(
            "task {}: {} after {} actions",
            task.id,
            trajectory.termination,
            trajectory.records.len()
        );
        Ok(RunResult {
            step_count: trajectory.records.len(),
            trajectory,
            concretized_task,
            trace_dir: trace_dir.to_path_buf(),
            final_state,
        })
    }

    /// Runs tasks with up to `parallel` concurrent sessions; each task gets
    /// `out/<task id>/`. Results keep input order.
    pub fn run_many(
        &self,
        tasks: &[TaskSpec],
        db: Option<&ReferenceDb>,
        out: &Path,
        parallel: usize,
    ) -> Vec<Result<RunResult, NavError>> {
        let parallel = parallel.max(1);
        if parallel == 1 {
            return tasks.iter().map(|t| self.run(t, db, &out.join(&t.id))).collect();
        }
        let next = std::sync::atomic::AtomicUsize::new(0);
        let results: Vec<std::sync::Mutex<Option<Result<RunResult, NavError>>>> =
            tasks.iter().map(|_| std::sync::Mutex::new(None)).collect();
        std::thread::scope(|s| {
            for _ in 0..parallel.min(tasks.len()) {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                    let Some(t) = tasks.get(i) else { break };
                    let r = self.run(t, db, &out.join(&t.id));
                    *results[i].lock().expect("result slot") = Some(r);
                });
            }
        });
        results
            .into_iter()
            .map(|m| m.into_inner().expect("result slot").expect("every task ran"))
            .collect()
    }
}
