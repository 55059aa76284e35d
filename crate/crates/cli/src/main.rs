mod settings;

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use webnav::browser::fixture::FixtureBackend;
use webnav::browser::{open_session, BackendKind, Session};
use webnav::choices;
use webnav::domain::{NextStep, TaskKind, TaskSpec, Termination, Trajectory};
use webnav::evalkit::{self, VerdictLedger};
use webnav::fsutil::write_atomic;
use webnav::navigator::Navigator;
use webnav::planner::{self, ReferenceDb};

use settings::{RuntimeArgs, Settings};

#[derive(Debug)]
pub enum CliError {
    /// Bad or missing flags; exit code 2.
    Usage(String),
    /// A task or step did not complete; exit code 1.
    Failure(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Failure(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

fn fail(e: impl std::fmt::Display) -> CliError {
    CliError::Failure(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "webnav", version, about = "Functionality-guided web navigation agent")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the agent on every task and write one trace directory per task.
    Navigate(NavigateArgs),
    /// Re-execute recorded trajectories and write evidence bundles.
    Replay(ReplayArgs),
    /// Record a verdict, or compute success rate and TOS from verdicts.
    Evaluate(EvaluateArgs),
    /// Turn concrete tasks into parameter-free functionality tasks.
    Abstract(AbstractArgs),
    /// Build the reference database used to concretize functionalities.
    BuildRefdb(BuildRefdbArgs),
    /// Write the ranked choices of one fixture state as JSON.
    DumpChoices(DumpChoicesArgs),
}

#[derive(Debug, Args)]
struct NavigateArgs {
    #[arg(long)]
    tasks: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    refdb: Option<PathBuf>,
    /// Maximum number of concurrent sessions.
    #[arg(long)]
    parallel: Option<usize>,
    #[command(flatten)]
    runtime: RuntimeArgs,
}

#[derive(Debug, Args)]
struct ReplayArgs {
    /// Directory written by `navigate`.
    #[arg(long)]
    runs: PathBuf,
    /// Task file; supplies start URLs.
    #[arg(long)]
    tasks: Option<PathBuf>,
    /// Bundle directory; one subdirectory per task.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    runtime: RuntimeArgs,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    runs: Option<PathBuf>,
    /// Verdict ledger (JSON lines).
    #[arg(long)]
    verdicts: PathBuf,
    /// Tasks with reference trajectory lengths.
    #[arg(long)]
    refs: Option<PathBuf>,
    /// Metric report path; defaults to <runs>/metrics.json.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Record a verdict for this replay bundle instead of computing metrics.
    #[arg(long, requires_all = ["evaluator", "decision"])]
    record: Option<PathBuf>,
    #[arg(long)]
    evaluator: Option<String>,
    #[arg(long, value_parser = ["pass", "fail"])]
    decision: Option<String>,
    #[arg(long)]
    note: Option<String>,
}

#[derive(Debug, Args)]
struct AbstractArgs {
    #[arg(long)]
    tasks: Option<PathBuf>,
    /// Output task file.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    runtime: RuntimeArgs,
}

#[derive(Debug, Args)]
struct BuildRefdbArgs {
    /// Concrete tasks to abstract and embed.
    #[arg(long)]
    tasks: Option<PathBuf>,
    /// Output database; also used as the resume checkpoint.
    #[arg(long)]
    refdb: Option<PathBuf>,
    #[command(flatten)]
    runtime: RuntimeArgs,
}

#[derive(Debug, Args)]
struct DumpChoicesArgs {
    #[arg(long)]
    app: String,
    /// Defaults to the app's initial state.
    #[arg(long)]
    state: Option<String>,
    /// Sentence the elements are ranked against.
    #[arg(long)]
    next_step: String,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    runtime: RuntimeArgs,
}

fn required(flag: Option<PathBuf>, file: Option<PathBuf>, name: &str) -> Result<PathBuf, CliError> {
    flag.or(file)
        .ok_or_else(|| CliError::Usage(format!("--{name} is required (flag or config file)")))
}

fn read_tasks(path: &Path) -> Result<Vec<TaskSpec>, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let tasks: Vec<TaskSpec> = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::Usage(format!("invalid task file {}: {e}", path.display())))?;
    for t in &tasks {
        t.validate().map_err(|e| CliError::Usage(format!("task {}: {e}", t.id)))?;
    }
    Ok(tasks)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(fail)?;
    s.push('\n');
    write_atomic(path, s.as_bytes()).map_err(|e| fail(format!("{}: {e}", path.display())))
}

fn navigate(a: NavigateArgs) -> Result<(), CliError> {
    let s = Settings::resolve(&a.runtime)?;
    let tasks = read_tasks(&required(a.tasks, s.file.tasks.clone(), "tasks")?)?;
    let out = required(a.out, s.file.out.clone(), "out")?;
    let refdb = a.refdb.or(s.file.refdb.clone());
    if refdb.is_none() && tasks.iter().any(|t| t.kind == TaskKind::Functionality) {
        return Err(CliError::Usage("functionality tasks need --refdb".into()));
    }
    let parallel = a.parallel.or(s.file.parallel).unwrap_or(1);
    if parallel == 0 {
        return Err(CliError::Usage("--parallel must be positive".into()));
    }
    let db = refdb
        .map(|p| ReferenceDb::load(&p).map_err(|e| CliError::Usage(e.to_string())))
        .transpose()?;
    let nav = Navigator {
        gateway: s.gateway()?,
        embedder: s.embedder(),
        backend: s.backend_config(),
        config: s.nav.clone(),
    };
    std::fs::create_dir_all(&out).map_err(|e| fail(format!("{}: {e}", out.display())))?;
    let mut failures = 0;
    for (task, result) in tasks.iter().zip(nav.run_many(&tasks, db.as_ref(), &out, parallel)) {
        match result {
            Ok(r) => {
                log::info!(
                    "{}: {} after {} action(s)",
                    task.id,
                    r.trajectory.termination,
                    r.trajectory.records.len()
                );
                if r.trajectory.termination == Termination::Error {
                    failures += 1;
                }
            }
            Err(e) => {
                log::error!("{}: {e}", task.id);
                failures += 1;
            }
        }
    }
    if failures > 0 {
        return Err(CliError::Failure(format!("{failures} of {} task(s) failed", tasks.len())));
    }
    Ok(())
}

fn load_trajectory(path: &Path) -> Result<Trajectory, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| fail(format!("{}: {e}", path.display())))?;
    Trajectory::from_json(&text).map_err(|e| fail(format!("{}: {e}", path.display())))
}

fn replay(a: ReplayArgs) -> Result<(), CliError> {
    let s = Settings::resolve(&a.runtime)?;
    let tasks = read_tasks(&required(a.tasks, s.file.tasks.clone(), "tasks")?)?;
    let out = required(a.out, None, "out")?;
    let backend = s.backend_config();
    let mut failures = 0;
    let mut replayed = 0;
    for task in &tasks {
        let tpath = a.runs.join(&task.id).join("trajectory.json");
        if !tpath.is_file() {
            log::warn!("{}: no trajectory under {}", task.id, a.runs.display());
            continue;
        }
        let trajectory = load_trajectory(&tpath)?;
        let mut session = open_session(&task.start_url, &backend).map_err(fail)?;
        let report = evalkit::replay(&trajectory, &mut session, &out.join(&task.id)).map_err(fail)?;
        replayed += 1;
        if report.all_executed() {
            log::info!("{}: replayed {} step(s)", task.id, report.steps.len());
        } else {
            failures += 1;
            log::error!("{}: replay diverged", task.id);
        }
    }
    if replayed == 0 {
        return Err(CliError::Failure("no trajectories to replay".into()));
    }
    if failures > 0 {
        return Err(CliError::Failure(format!("{failures} replay(s) diverged")));
    }
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> Result<(), CliError> {
    let ledger = VerdictLedger::new(&a.verdicts);
    if let Some(bundle) = a.record {
        let evaluator = a.evaluator.expect("required by clap");
        let success = a.decision.as_deref() == Some("pass");
        let v = ledger
            .record_verdict(&bundle, &evaluator, success, a.note.as_deref())
            .map_err(|e| CliError::Usage(e.to_string()))?;
        log::info!("recorded {} for {} by {}", if v.success { "pass" } else { "fail" }, v.task_id, v.evaluator);
        return Ok(());
    }
    let runs = required(a.runs, None, "runs")?;
    let tasks = read_tasks(&required(a.refs, None, "refs")?)?;
    let verdicts = ledger.load().map_err(|e| CliError::Usage(e.to_string()))?;
    let mut lengths = HashMap::new();
    for t in &tasks {
        let p = runs.join(&t.id).join("trajectory.json");
        if p.is_file() {
            let traj = load_trajectory(&p)?;
            if traj.termination == Termination::StepLimit {
                log::info!("{}: step-limited run, generated length is its action count", t.id);
            }
            lengths.insert(t.id.clone(), traj.records.len());
        }
    }
    let report = evalkit::evaluate(&tasks, &lengths, &verdicts).map_err(fail)?;
    let out = a.out.unwrap_or_else(|| runs.join("metrics.json"));
    write_json(&out, &report)?;
    eprint!("{}", report.to_table());
    Ok(())
}

fn abstract_cmd(a: AbstractArgs) -> Result<(), CliError> {
    let s = Settings::resolve(&a.runtime)?;
    let tasks = read_tasks(&required(a.tasks, s.file.tasks.clone(), "tasks")?)?;
    let out = required(a.out, s.file.out.clone(), "out")?;
    let abstracted = evalkit::abstract_dataset(&s.gateway()?, &tasks, s.nav.temperature).map_err(fail)?;
    write_json(&out, &abstracted)?;
    log::info!("wrote {} functionality task(s) to {}", abstracted.len(), out.display());
    Ok(())
}

fn build_refdb(a: BuildRefdbArgs) -> Result<(), CliError> {
    let s = Settings::resolve(&a.runtime)?;
    let tasks = read_tasks(&required(a.tasks, s.file.tasks.clone(), "tasks")?)?;
    let out = required(a.refdb, s.file.refdb.clone(), "refdb")?;
    let concrete: Vec<String> = tasks
        .iter()
        .filter(|t| t.kind == TaskKind::Concrete)
        .map(|t| t.description.clone())
        .collect();
    if concrete.is_empty() {
        return Err(CliError::Usage("no concrete tasks in the task file".into()));
    }
    let embedder = s.embedder();
    let db = planner::build_reference_db(&concrete, &s.gateway()?, &*embedder, s.nav.temperature, Some(&out))
        .map_err(fail)?;
    db.save(&out).map_err(fail)?;
    log::info!("reference database with {} entries at {}", db.len(), out.display());
    Ok(())
}

fn dump_choices(a: DumpChoicesArgs) -> Result<(), CliError> {
    let s = Settings::resolve(&a.runtime)?;
    let root = s
        .fixture_dir
        .clone()
        .ok_or_else(|| CliError::Usage("dump-choices requires --fixture-dir".into()))?;
    let url = format!("fixture://{}/", a.app);
    let mut backend = FixtureBackend::open(&root, &url).map_err(|e| CliError::Usage(e.to_string()))?;
    if let Some(state) = &a.state {
        backend = backend.at_state(state).map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let mut session = Session::from_backend(BackendKind::Fixture, Box::new(backend));
    let page = session.capture_state(0).map_err(fail)?;
    let cfg = &s.nav;
    let embedder = s.embedder();
    let prepared = choices::prepare(&page.elements, cfg.html_truncation_limit);
    let ranked = choices::score_choices(&prepared, &NextStep::Step(a.next_step), &HashMap::new(), &*embedder, cfg)
        .map_err(fail)?;
    let ranked = choices::attach_all_neighbors(&ranked, &page.text_blocks, cfg);
    write_json(&a.out, &ranked.to_context_json())?;
    log::info!("{} ranked choice(s) written to {}", ranked.len(), a.out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Navigate(a) => navigate(a),
        Command::Replay(a) => replay(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Abstract(a) => abstract_cmd(a),
        Command::BuildRefdb(a) => build_refdb(a),
        Command::DumpChoices(a) => dump_choices(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}\n\nRun with --help for usage.");
            ExitCode::from(2)
        }
        Err(CliError::Failure(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
