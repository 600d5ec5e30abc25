//! `goalplan`: headless access to the planning engine.
//!
//! Every subcommand reads the engine's document formats and writes them back
//! out, so commands compose through files or pipes. Exit codes: 0 success,
//! 1 I/O failure, 2 invalid input or blocked compilation, 3 resource limit.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use goalplan_core::automaton::{parse_automaton, GoalAutomaton};
use goalplan_core::compiler::{
    compile_task, BranchingPlan, CompilationReport, CompileOptions, OmissionReason, PlanStatus,
};
use goalplan_core::domain::{ground_task, parse_domain, Domain, GroundTask};
use goalplan_core::executor::{
    simulate, ExecutionSession, ExecutionTrace, Script, SessionOptions, DEFAULT_REPLAN_EXPANSIONS,
};
use goalplan_core::metrics::{evaluate, parse_scenario, Evaluation, EvaluationError, MetricsError};
use goalplan_core::parse_atoms;
use goalplan_core::planner::{find_plan_for, Goal, Limits, Mode, PlanResult, DEFAULT_MAX_EXPANSIONS};
use goalplan_core::world::{initial_state, parse_world, World, WorldState};
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "goalplan",
    version,
    about = "Compile, run and score goal automata for a mobile robot"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check documents for errors without compiling.
    Validate(ValidateArgs),
    /// Compile a goal automaton into a branching plan.
    Compile(CompileArgs),
    /// Find a single action sequence for a goal.
    Plan(PlanArgs),
    /// Execute a plan in simulation, optionally following a script.
    Simulate(SimulateArgs),
    /// Report runtime score, feasibility score and human effort.
    Score(ScoreArgs),
    /// Serve the HTTP interface.
    Serve(ServeArgs),
}

#[derive(Args)]
struct TaskArgs {
    /// PDDL domain file.
    #[arg(long)]
    domain: PathBuf,
    /// World file.
    #[arg(long)]
    world: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Optimal,
    Greedy,
}

#[derive(Args)]
struct SearchArgs {
    /// Planner mode; greedy plans are not guaranteed shortest.
    #[arg(long, value_enum, default_value = "optimal")]
    mode: ModeArg,
    /// Node-expansion budget.
    #[arg(long, default_value_t = DEFAULT_MAX_EXPANSIONS)]
    max_expansions: u64,
}

impl SearchArgs {
    fn mode(&self) -> Mode {
        match self.mode {
            ModeArg::Optimal => Mode::Optimal,
            ModeArg::Greedy => Mode::Greedy,
        }
    }
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    domain: Option<PathBuf>,
    #[arg(long)]
    world: Option<PathBuf>,
    #[arg(long)]
    automaton: Option<PathBuf>,
    /// Scenario file; requires --domain.
    #[arg(long, requires = "domain")]
    scenario: Option<PathBuf>,
}

#[derive(Args)]
struct CompileArgs {
    #[command(flatten)]
    task: TaskArgs,
    /// Goal automaton file.
    #[arg(long)]
    automaton: PathBuf,
    #[command(flatten)]
    search: SearchArgs,
    /// Also write the compilation report here.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Output file (default: standard output).
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlanArgs {
    #[command(flatten)]
    task: TaskArgs,
    /// Atom that must hold at the end, e.g. `at(cup,countertop)`. Repeatable.
    #[arg(long = "goal")]
    goals: Vec<String>,
    /// Atom that must not hold at the end. Repeatable.
    #[arg(long = "absent")]
    absent: Vec<String>,
    #[command(flatten)]
    search: SearchArgs,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
#[group(id = "source", required = true, multiple = false)]
struct PlanSource {
    /// Compiled plan file.
    #[arg(long, group = "source")]
    plan: Option<PathBuf>,
    /// Goal automaton to compile first.
    #[arg(long, group = "source")]
    automaton: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    task: TaskArgs,
    #[command(flatten)]
    source: PlanSource,
    /// Deviations and conditional confirmations keyed by step. Without a
    /// script the run stops at the first wait.
    #[arg(long)]
    script: Option<PathBuf>,
    /// Expansion budget for each local replan.
    #[arg(long, default_value_t = DEFAULT_REPLAN_EXPANSIONS)]
    replan_expansions: u64,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Args)]
struct ScoreArgs {
    #[command(flatten)]
    task: TaskArgs,
    /// Scenario file with objectives and the human model.
    #[arg(long)]
    scenario: PathBuf,
    /// Compiled plan file. Repeatable.
    #[arg(long = "plan")]
    plans: Vec<PathBuf>,
    /// Goal automaton to compile and score. Repeatable.
    #[arg(long = "automaton")]
    automata: Vec<PathBuf>,
    /// Execution trace for the runtime score (`-` reads standard input).
    /// Only with a single plan.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    /// Listen on all interfaces instead of only the loopback one.
    #[arg(long)]
    expose: bool,
}

/// Why a command failed, and the exit code that says so.
enum Failure {
    Io(String),
    Invalid(String),
    ResourceLimit(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Invalid(_) => 2,
            Failure::ResourceLimit(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Io(m) | Failure::Invalid(m) | Failure::ResourceLimit(m) => m,
        }
    }
}

type CmdResult = Result<(), Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    if path == Path::new("-") {
        let mut text = String::new();
        std::io::stdin()
            .read_to_string(&mut text)
            .map_err(|e| Failure::Io(format!("standard input: {e}")))?;
        return Ok(text);
    }
    std::fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn write(out: Option<&Path>, text: &str) -> CmdResult {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::Io(format!("standard output: {e}"))),
    }
}

/// Canonical name of an enum tag, e.g. `UNDERSPECIFIED`.
fn tag(value: serde_json::Value) -> String {
    value.as_str().unwrap_or_default().to_string()
}

/// Invalid input, prefixed with the offending file.
fn located(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Invalid(format!("{}: {e}", path.display()))
}

fn load_domain(path: &Path) -> Result<Domain, Failure> {
    parse_domain(&read(path)?).map_err(|e| Failure::Invalid(format!("{}:{e}", path.display())))
}

fn load_world(path: &Path) -> Result<World, Failure> {
    parse_world(&read(path)?).map_err(|e| located(path, e))
}

fn load_automaton(path: &Path) -> Result<GoalAutomaton, Failure> {
    parse_automaton(&read(path)?).map_err(|e| located(path, e))
}

struct Loaded {
    domain: Domain,
    world: World,
    task: GroundTask,
    init: WorldState,
}

fn load_task(args: &TaskArgs) -> Result<Loaded, Failure> {
    let domain = load_domain(&args.domain)?;
    let world = load_world(&args.world)?;
    let task = ground_task(&domain, &world).map_err(|e| located(&args.world, e))?;
    let init = initial_state(&world, &task).map_err(|e| located(&args.world, e))?;
    Ok(Loaded {
        domain,
        world,
        task,
        init,
    })
}

fn print_issues(path: &Path, report: &CompilationReport) {
    for issue in &report.issues {
        eprintln!(
            "{}: {}: {}: {}",
            path.display(),
            tag(json!(issue.severity)),
            tag(json!(issue.code)),
            issue.message
        );
    }
}

fn compile_plan(
    loaded: &Loaded,
    path: &Path,
    options: CompileOptions,
) -> Result<(BranchingPlan, CompilationReport), Failure> {
    let automaton = load_automaton(path)?;
    let (plan, report) = compile_task(&loaded.task, &loaded.init, &automaton, options);
    print_issues(path, &report);
    for o in plan.omitted() {
        eprintln!(
            "{}: warning: checkpoint `{}` omitted ({})",
            path.display(),
            o.checkpoint,
            tag(json!(o.reason))
        );
    }
    if report.status == PlanStatus::Blocked {
        let codes: Vec<String> = report
            .issues
            .iter()
            .filter(|i| i.is_blocking())
            .map(|i| tag(json!(i.code)))
            .collect();
        return Err(Failure::Invalid(format!(
            "{}: compilation blocked by {}",
            path.display(),
            codes.join(", ")
        )));
    }
    Ok((plan, report))
}

fn cmd_validate(args: ValidateArgs) -> CmdResult {
    let domain = args.domain.as_deref().map(load_domain).transpose()?;
    let world = args.world.as_deref().map(load_world).transpose()?;
    let task = match (&domain, &world) {
        (Some(d), Some(w)) => {
            let path = args.world.as_deref().expect("world given");
            let task = ground_task(d, w).map_err(|e| located(path, e))?;
            initial_state(w, &task).map_err(|e| located(path, e))?;
            Some(task)
        }
        _ => None,
    };
    let mut blocked = false;
    if let Some(path) = &args.automaton {
        let automaton = load_automaton(path)?;
        let mut issues = automaton.validate();
        if let Some(task) = &task {
            issues.extend(automaton.check_atoms(task));
        }
        for issue in &issues {
            eprintln!("{}: {}: {}", path.display(), tag(json!(issue.code)), issue.message);
        }
        blocked = issues.iter().any(|i| i.is_blocking());
    }
    if let (Some(path), Some(domain)) = (&args.scenario, &domain) {
        let scenario = parse_scenario(&read(path)?, domain).map_err(|e| located(path, e))?;
        if let Some(task) = &task {
            scenario.check_objectives(task).map_err(|e| located(path, e))?;
        }
    }
    if blocked {
        return Err(Failure::Invalid("automaton has blocking issues".into()));
    }
    println!("ok");
    Ok(())
}

fn cmd_compile(args: CompileArgs) -> CmdResult {
    let loaded = load_task(&args.task)?;
    let options = CompileOptions {
        max_expansions: args.search.max_expansions,
        mode: args.search.mode(),
    };
    let (plan, report) = compile_plan(&loaded, &args.automaton, options)?;
    write(args.out.as_deref(), &plan.to_json())?;
    if let Some(path) = &args.report {
        let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    }
    if plan.omitted().iter().any(|o| o.reason == OmissionReason::ResourceLimit) {
        return Err(Failure::ResourceLimit(
            "planner budget exhausted for some checkpoints".into(),
        ));
    }
    Ok(())
}

fn cmd_plan(args: PlanArgs) -> CmdResult {
    let loaded = load_task(&args.task)?;
    let holds = parse_atoms(&args.goals).map_err(|e| Failure::Invalid(format!("--goal: {e}")))?;
    let absent = parse_atoms(&args.absent).map_err(|e| Failure::Invalid(format!("--absent: {e}")))?;
    let unknown = loaded.task.unknown_atoms(holds.iter().chain(&absent));
    if !unknown.is_empty() {
        let names: Vec<String> = unknown.iter().map(ToString::to_string).collect();
        return Err(Failure::Invalid(format!(
            "atoms outside the predicate universe: {}",
            names.join(", ")
        )));
    }
    let limits = Limits {
        max_expansions: args.search.max_expansions,
        max_time: None,
        mode: args.search.mode(),
    };
    let result = find_plan_for(&loaded.task, &loaded.init, &Goal { holds, absent }, limits);
    let body = match &result {
        PlanResult::Solved(p) => json!({
            "outcome": result.outcome(),
            "optimal": p.optimal,
            "length": p.len(),
            "expanded": p.expanded,
            "actions": p.actions.iter().map(ToString::to_string).collect::<Vec<_>>(),
        }),
        PlanResult::Unsolvable => json!({ "outcome": result.outcome() }),
        PlanResult::ResourceLimit { expanded } => json!({ "outcome": result.outcome(), "expanded": expanded }),
    };
    let mut text = serde_json::to_string_pretty(&body).expect("plan serializes");
    text.push('\n');
    write(args.out.as_deref(), &text)?;
    match result {
        PlanResult::Solved(_) => Ok(()),
        PlanResult::Unsolvable => Err(Failure::Invalid("goal is unreachable".into())),
        PlanResult::ResourceLimit { expanded } => {
            Err(Failure::ResourceLimit(format!("no plan within {expanded} expansions")))
        }
    }
}

fn plan_from(loaded: &Loaded, source: &PlanSource) -> Result<BranchingPlan, Failure> {
    match (&source.plan, &source.automaton) {
        (Some(path), _) => {
            let plan = BranchingPlan::from_json(&read(path)?, &loaded.task).map_err(|e| located(path, e))?;
            if plan.status() == PlanStatus::Blocked {
                return Err(Failure::Invalid(format!("{}: plan is blocked", path.display())));
            }
            Ok(plan)
        }
        (None, Some(path)) => compile_plan(loaded, path, CompileOptions::default()).map(|(plan, _)| plan),
        (None, None) => unreachable!("clap requires a plan source"),
    }
}

fn cmd_simulate(args: SimulateArgs) -> CmdResult {
    let loaded = load_task(&args.task)?;
    let plan = plan_from(&loaded, &args.source)?;
    let script = match &args.script {
        Some(path) => Script::from_json(&read(path)?).map_err(|e| located(path, e))?,
        None => Script::default(),
    };
    let options = SessionOptions {
        replan_expansions: args.replan_expansions,
        ..SessionOptions::default()
    };
    let mut session = ExecutionSession::start(Arc::new(plan), Arc::new(loaded.task), options)
        .map_err(|e| Failure::Invalid(e.to_string()))?;
    let script_path = args.script.as_deref().unwrap_or(Path::new("script"));
    simulate(&mut session, &script).map_err(|e| located(script_path, e))?;
    let trace = session.trace();
    eprintln!("finished after {} steps: {}", session.steps(), json!(trace.status));
    write(args.out.as_deref(), &trace.to_json())
}

fn plan_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn render_text(rows: &[(String, Evaluation)]) -> String {
    let header = ["plan", "runtime", "feasibility", "effort"];
    let cells: Vec<[String; 4]> = rows
        .iter()
        .map(|(id, e)| {
            [
                id.clone(),
                e.runtime.map_or("-".to_string(), |s| s.to_string()),
                e.feasibility.to_string(),
                e.effort.to_string(),
            ]
        })
        .collect();
    let widths: Vec<usize> = (0..4)
        .map(|i| {
            cells
                .iter()
                .map(|c| c[i].len())
                .chain([header[i].len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for row in std::iter::once(header.map(String::from)).chain(cells) {
        let line: Vec<String> = row.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
    }
    out
}

fn cmd_score(args: ScoreArgs) -> CmdResult {
    let loaded = load_task(&args.task)?;
    let scenario = parse_scenario(&read(&args.scenario)?, &loaded.domain).map_err(|e| located(&args.scenario, e))?;
    let count = args.plans.len() + args.automata.len();
    if count == 0 {
        return Err(Failure::Invalid("nothing to score: pass --plan or --automaton".into()));
    }
    let trace = match &args.trace {
        Some(_) if count > 1 => return Err(Failure::Invalid("--trace needs exactly one plan".into())),
        Some(path) => Some(ExecutionTrace::from_json(&read(path)?).map_err(|e| located(path, e))?),
        None => None,
    };
    let mut plans = Vec::new();
    for path in &args.plans {
        plans.push((
            plan_id(path),
            plan_from(
                &loaded,
                &PlanSource {
                    plan: Some(path.clone()),
                    automaton: None,
                },
            )?,
        ));
    }
    for path in &args.automata {
        plans.push((
            plan_id(path),
            plan_from(
                &loaded,
                &PlanSource {
                    plan: None,
                    automaton: Some(path.clone()),
                },
            )?,
        ));
    }
    let task = Arc::new(loaded.task.clone());
    let mut rows = Vec::new();
    for (id, plan) in plans {
        let e = evaluate(
            Arc::new(plan),
            task.clone(),
            &scenario,
            &loaded.domain,
            &loaded.world,
            trace.as_ref(),
        )
        .map_err(|e| match e {
            EvaluationError::Metrics(MetricsError::ResourceLimit { .. }) => {
                Failure::ResourceLimit(format!("{id}: {e}"))
            }
            other => Failure::Invalid(format!("{id}: {other}")),
        })?;
        rows.push((id, e));
    }
    let text = match args.format {
        Format::Text => render_text(&rows),
        Format::Json => {
            let rows: Vec<_> = rows
                .iter()
                .map(|(id, e)| {
                    let mut v = serde_json::to_value(e).expect("evaluation serializes");
                    v["plan"] = json!(id);
                    v
                })
                .collect();
            let mut text = serde_json::to_string_pretty(&rows).expect("rows serialize");
            text.push('\n');
            text
        }
    };
    write(args.out.as_deref(), &text)
}

fn cmd_serve(args: ServeArgs) -> CmdResult {
    let ip = if args.expose {
        IpAddr::V4(Ipv4Addr::UNSPECIFIED)
    } else {
        IpAddr::V4(Ipv4Addr::LOCALHOST)
    };
    let addr = SocketAddr::new(ip, args.port);
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::Io(e.to_string()))?;
    eprintln!("listening on http://{addr}");
    runtime
        .block_on(goalplan_service::serve(addr))
        .map_err(|e| Failure::Io(format!("{addr}: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate(a) => cmd_validate(a),
        Command::Compile(a) => cmd_compile(a),
        Command::Plan(a) => cmd_plan(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Score(a) => cmd_score(a),
        Command::Serve(a) => cmd_serve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
