//! Evaluation harness: trajectory replay into reviewable bundles, human
//! verdict ledger, success rate and trajectory optimization score, and
//! dataset abstraction.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::browser::Session;
use crate::domain::{TaskKind, TaskSpec, Trajectory};
use crate::embeddings::tokenize;
use crate::fsutil::write_atomic;
use crate::llm::{Gateway, LlmError};
use crate::planner;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("total task count must be at least 1")]
    ZeroTasks,
    #[error("task {0} succeeded but has no reference length")]
    MissingReferenceLength(String),
    #[error("task {0} succeeded with an empty trajectory")]
    EmptySuccessfulTrajectory(String),
    #[error("no trace bundle at {0}")]
    BundleNotFound(String),
    #[error("abstraction of {task:?} still mentions {leaked:?}")]
    ParameterLeak { task: String, leaked: Vec<String> },
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("i/o: {0}")]
    Io(String),
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> EvalError {
    EvalError::Io(format!("{}: {e}", path.display()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepStatus {
    Executed,
    Failed,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayStep {
    pub index: usize,
    pub status: StepStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub task_id: String,
    pub steps: Vec<ReplayStep>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_state: Option<String>,
}

impl ReplayReport {
    pub fn all_executed(&self) -> bool {
        self.steps.iter().all(|s| s.status == StepStatus::Executed)
    }
}

pub const REPORT_FILE: &str = "report.json";

/// Re-executes every record in order and writes a bundle:
/// `step_NNN/{before.png, after.png, step.json}` plus `report.json`. After the
/// first failing step the rest are marked skipped.
pub fn replay(trajectory: &Trajectory, session: &mut Session, bundle: &Path) -> Result<ReplayReport, EvalError> {
    let write = |rel: String, bytes: &[u8]| {
        let p = bundle.join(rel);
        write_atomic(&p, bytes).map_err(|e| io_err(&p, e))
    };
    std::fs::create_dir_all(bundle).map_err(|e| io_err(bundle, e))?;
    let mut steps = Vec::new();
    let mut failed = false;
    for (index, action) in trajectory.records.iter().enumerate() {
        if failed {
            steps.push(ReplayStep {
                index,
                status: StepStatus::Skipped,
                error: None,
            });
            continue;
        }
        let dir = format!("step_{index:03}");
        let step_json = serde_json::to_string_pretty(action).expect("action json") + "\n";
        write(format!("{dir}/step.json"), step_json.as_bytes())?;
        let before = session.capture_state(index).map(|s| s.screenshot.png);
        if let Ok(png) = &before {
            write(format!("{dir}/before.png"), png)?;
        }
        let outcome = before.and_then(|_| session.execute(action));
        match outcome {
            Ok(_) => {
                if let Ok(after) = session.capture_state(index + 1) {
                    write(format!("{dir}/after.png"), &after.screenshot.png)?;
                }
                steps.push(ReplayStep {
                    index,
                    status: StepStatus::Executed,
                    error: None,
                });
            }
            Err(e) => {
                failed = true;
                steps.push(ReplayStep {
                    index,
                    status: StepStatus::Failed,
                    error: Some(e.to_string()),
                });
            }
        }
    }
    let report = ReplayReport {
        task_id: trajectory.task_id.clone(),
        steps,
        final_state: session.state_token(),
    };
    let json = serde_json::to_string_pretty(&report).expect("report json") + "\n";
    write(REPORT_FILE.into(), json.as_bytes())?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub task_id: String,
    pub success: bool,
    pub evaluator: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Per-task outcome: success only with at least one verdict and all
/// verdicts positive.
pub fn aggregate(verdicts: &[Verdict]) -> BTreeMap<String, bool> {
    let mut out: BTreeMap<String, bool> = BTreeMap::new();
    for v in verdicts {
        let e = out.entry(v.task_id.clone()).or_insert(true);
        *e &= v.success;
    }
    out
}

/// Exact success rate in percent.
pub fn success_rate_exact(successes: usize, total_tasks: usize) -> Result<BigRational, EvalError> {
    if total_tasks == 0 {
        return Err(EvalError::ZeroTasks);
    }
    Ok(BigRational::new(
        BigInt::from(successes) * 100,
        BigInt::from(total_tasks),
    ))
}

/// `100 × unanimous successes / total_tasks`.
pub fn compute_success_rate(verdicts: &[Verdict], total_tasks: usize) -> Result<f64, EvalError> {
    let successes = aggregate(verdicts).values().filter(|s| **s).count();
    Ok(success_rate_exact(successes, total_tasks)?
        .to_f64()
        .expect("finite rate"))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskOutcome {
    pub task_id: String,
    pub success: bool,
    pub generated_length: usize,
    #[serde(default)]
    pub reference_length: Option<u32>,
}

/// Per-task scores: 0 for failures, else `min(1, reference / generated)`.
pub fn task_tos_exact(outcomes: &[TaskOutcome]) -> Result<Vec<BigRational>, EvalError> {
    outcomes
        .iter()
        .map(|o| {
            if !o.success {
                return Ok(BigRational::zero());
            }
            let reference = o
                .reference_length
                .ok_or_else(|| EvalError::MissingReferenceLength(o.task_id.clone()))?;
            if o.generated_length == 0 {
                return Err(EvalError::EmptySuccessfulTrajectory(o.task_id.clone()));
            }
            let r = BigRational::new(BigInt::from(reference), BigInt::from(o.generated_length));
            Ok(r.min(BigRational::from_integer(BigInt::from(1))))
        })
        .collect()
}

pub fn compute_tos_exact(outcomes: &[TaskOutcome]) -> Result<BigRational, EvalError> {
    if outcomes.is_empty() {
        return Err(EvalError::ZeroTasks);
    }
    let scores = task_tos_exact(outcomes)?;
    let sum = scores.into_iter().fold(BigRational::zero(), |a, b| a + b);
    Ok(sum / BigRational::from_integer(BigInt::from(outcomes.len())))
}

pub fn compute_tos(outcomes: &[TaskOutcome]) -> Result<f64, EvalError> {
    Ok(compute_tos_exact(outcomes)?.to_f64().expect("finite score"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskMetric {
    pub task_id: String,
    pub success: bool,
    pub generated_length: usize,
    #[serde(default)]
    pub reference_length: Option<u32>,
    pub task_tos: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub success_rate: f64,
    pub tos: f64,
    pub per_task: Vec<TaskMetric>,
}

impl MetricReport {
    /// Plain-text table; rates rounded to 2 decimals for display only.
    pub fn to_table(&self) -> String {
        let mut s = format!("{:<28} {:>7} {:>5} {:>5} {:>6}\n", "task", "success", "gen", "ref", "tos");
        for t in &self.per_task {
            s.push_str(&format!(
                "{:<28} {:>7} {:>5} {:>5} {:>6.2}\n",
                t.task_id,
                if t.success { "yes" } else { "no" },
                t.generated_length,
                t.reference_length.map_or("-".to_string(), |r| r.to_string()),
                t.task_tos
            ));
        }
        s.push_str(&format!("SR  {:.2}%\nTOS {:.2}\n", self.success_rate, self.tos));
        s
    }
}

/// Joins tasks, generated lengths and verdicts into a report. Tasks without
/// verdicts count as failures. For functionality tasks the reference length
/// is the one stored on the task (that of its concrete counterpart).
pub fn evaluate(
    tasks: &[TaskSpec],
    generated_lengths: &HashMap<String, usize>,
    verdicts: &[Verdict],
) -> Result<MetricReport, EvalError> {
    let agg = aggregate(verdicts);
    let outcomes: Vec<TaskOutcome> = tasks
        .iter()
        .map(|t| TaskOutcome {
            task_id: t.id.clone(),
            success: agg.get(&t.id).copied().unwrap_or(false),
            generated_length: generated_lengths.get(&t.id).copied().unwrap_or(0),
            reference_length: t.reference_length,
        })
        .collect();
    let per = task_tos_exact(&outcomes)?;
    let successes = outcomes.iter().filter(|o| o.success).count();
    Ok(MetricReport {
        success_rate: success_rate_exact(successes, tasks.len())?.to_f64().expect("finite"),
        tos: compute_tos_exact(&outcomes)?.to_f64().expect("finite"),
        per_task: outcomes
            .into_iter()
            .zip(per)
            .map(|(o, s)| TaskMetric {
                task_id: o.task_id,
                success: o.success,
                generated_length: o.generated_length,
                reference_length: o.reference_length,
                task_tos: s.to_f64().expect("finite"),
            })
            .collect(),
    })
}

/// Append-only JSON-lines verdict ledger. On load, a later line for the same
/// (task, evaluator) replaces the earlier one.
pub struct VerdictLedger {
    path: PathBuf,
}

impl VerdictLedger {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        VerdictLedger { path: path.into() }
    }

    pub fn load(&self) -> Result<Vec<Verdict>, EvalError> {
        if !self.path.exists() {
            return Ok(Vec::new());
        }
        let f = std::fs::File::open(&self.path).map_err(|e| io_err(&self.path, e))?;
        let mut order: Vec<(String, String)> = Vec::new();
        let mut latest: HashMap<(String, String), Verdict> = HashMap::new();
        for (n, line) in std::io::BufReader::new(f).lines().enumerate() {
            let line = line.map_err(|e| io_err(&self.path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let v: Verdict =
                serde_json::from_str(&line).map_err(|e| io_err(&self.path, format!("line {}: {e}", n + 1)))?;
            let key = (v.task_id.clone(), v.evaluator.clone());
            if latest.insert(key.clone(), v).is_none() {
                order.push(key);
            }
        }
        Ok(order.into_iter().map(|k| latest.remove(&k).expect("present")).collect())
    }

    fn append(&self, v: &Verdict) -> Result<(), EvalError> {
        if let Some(dir) = self.path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        }
        let mut f = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(|e| io_err(&self.path, e))?;
        writeln!(f, "{}", serde_json::to_string(v).expect("verdict json")).map_err(|e| io_err(&self.path, e))
    }

    /// Records a verdict for the replay bundle at `bundle`; the task id is
    /// read from the bundle's report.
    pub fn record_verdict(
        &self,
        bundle: &Path,
        evaluator: &str,
        decision: bool,
        note: Option<&str>,
    ) -> Result<Verdict, EvalError> {
        let report_path = bundle.join(REPORT_FILE);
        if !report_path.is_file() {
            return Err(EvalError::BundleNotFound(bundle.display().to_string()));
        }
        let report: ReplayReport = serde_json::from_slice(
            &std::fs::read(&report_path).map_err(|e| io_err(&report_path, e))?,
        )
        .map_err(|e| io_err(&report_path, e))?;
        let v = Verdict {
            task_id: report.task_id,
            success: decision,
            evaluator: evaluator.to_string(),
            note: note.map(str::to_string),
        };
        if self
            .load()?
            .iter()
            .any(|old| old.task_id == v.task_id && old.evaluator == v.evaluator)
        {
            log::warn!(
                "overwriting the verdict of {} for task {}",
                v.evaluator,
                v.task_id
            );
        }
        self.append(&v)?;
        Ok(v)
    }
}

const STOP_WORDS: &[&str] = &[
    "a", "an", "the", "and", "or", "of", "for", "to", "in", "on", "with", "by", "at", "from", "size",
    "item", "items",
];

/// Parameter tokens (stop words removed) that appear in `text`.
pub fn leaked_parameters(text: &str, parameters: &[String]) -> Vec<String> {
    let words: HashSet<String> = tokenize(text).into_iter().collect();
    let mut leaked: Vec<String> = parameters
        .iter()
        .flat_map(|p| tokenize(p))
        .filter(|t| !STOP_WORDS.contains(&t.as_str()) && words.contains(t))
        .collect();
    leaked.sort();
    leaked.dedup();
    leaked
}

/// Abstract functionality of a concrete task. When the task lists its
/// parameters, an output that still mentions one is retried once.
pub fn abstract_task(gateway: &Gateway, task: &TaskSpec, temperature: f64) -> Result<String, EvalError> {
    let mut leaked = Vec::new();
    for attempt in 0..2 {
        let out = planner::abstract_functionality(gateway, &task.description, temperature)?;
        leaked = leaked_parameters(&out, &task.parameters);
        if leaked.is_empty() {
            return Ok(out);
        }
        log::warn!("abstraction attempt {} of {} leaked {leaked:?}", attempt + 1, task.id);
    }
    Err(EvalError::ParameterLeak {
        task: task.id.clone(),
        leaked,
    })
}

/// Functionality-kind mirror of `tasks`, in input order. Reference lengths
/// carry over from the concrete tasks.
pub fn abstract_dataset(gateway: &Gateway, tasks: &[TaskSpec], temperature: f64) -> Result<Vec<TaskSpec>, EvalError> {
    tasks
        .iter()
        .map(|t| {
            Ok(TaskSpec {
                description: abstract_task(gateway, t, temperature)?,
                kind: TaskKind::Functionality,
                parameters: Vec::new(),
                ..t.clone()
            })
        })
        .collect()
}
