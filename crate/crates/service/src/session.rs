//! Authoring sessions and their background compilation.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::Duration;

use goalplan_core::automaton::GoalAutomaton;
use goalplan_core::compiler::{compile_task, BranchingPlan, CompilationReport, CompileOptions};
use goalplan_core::domain::{ground_task, Domain, GroundTask};
use goalplan_core::executor::ExecutionSession;
use goalplan_core::world::{initial_state, World};
use tokio::sync::watch;

/// Quiet period before a compilation starts, so bursts of edits coalesce.
const DEBOUNCE: Duration = Duration::from_millis(15);

/// A successful compilation.
#[derive(Clone, Debug)]
pub struct CompiledPlan {
    pub plan: Arc<BranchingPlan>,
    pub task: Arc<GroundTask>,
    pub report: CompilationReport,
}

/// The result of compiling one revision. `Err` holds why no plan could be
/// produced at all (missing inputs, grounding failure).
#[derive(Clone, Debug)]
pub struct Compiled {
    pub revision: u64,
    pub outcome: Result<CompiledPlan, String>,
}

#[derive(Debug)]
pub struct Session {
    pub domain: Option<Domain>,
    pub world: Option<World>,
    pub automaton: GoalAutomaton,
    /// Bumped by every change to domain, world or automaton.
    pub revision: u64,
    pub compiled: Option<Compiled>,
    pub execution: Option<ExecutionSession>,
    compiling: bool,
    compiled_revision: watch::Sender<u64>,
}

impl Session {
    fn new() -> Self {
        Session {
            domain: None,
            world: None,
            automaton: GoalAutomaton::new(),
            revision: 0,
            compiled: None,
            execution: None,
            compiling: false,
            compiled_revision: watch::Sender::new(u64::MAX),
        }
    }

    /// The grounded task for the current domain and world, if both are
    /// present and compatible. Used to check atoms in automaton edits.
    pub fn universe(&self) -> Option<GroundTask> {
        ground_task(self.domain.as_ref()?, self.world.as_ref()?).ok()
    }

    /// Latest successful compilation, whatever its revision.
    pub fn plan(&self) -> Option<&CompiledPlan> {
        self.compiled.as_ref().and_then(|c| c.outcome.as_ref().ok())
    }
}

pub type SessionRef = Arc<Mutex<Session>>;

pub fn lock(s: &SessionRef) -> MutexGuard<'_, Session> {
    s.lock().unwrap_or_else(|e| e.into_inner())
}

#[derive(Clone, Default)]
pub struct Registry {
    sessions: Arc<Mutex<HashMap<String, SessionRef>>>,
}

impl Registry {
    pub fn create(&self) -> (String, SessionRef) {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let session = Arc::new(Mutex::new(Session::new()));
        self.sessions
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .insert(id.clone(), session.clone());
        (id, session)
    }

    pub fn get(&self, id: &str) -> Option<SessionRef> {
        self.sessions.lock().unwrap_or_else(|e| e.into_inner()).get(id).cloned()
    }

    pub fn remove(&self, id: &str) -> Option<SessionRef> {
        self.sessions.lock().unwrap_or_else(|e| e.into_inner()).remove(id)
    }
}

/// Records a change and makes sure a compilation of the newest revision
/// follows. At most one compilation runs per session; edits arriving while it
/// runs are picked up by a single follow-up compilation.
///
/// `s` is the locked `slot`: callers check the base revision and bump it under
/// one lock.
pub fn touch(s: &mut Session, slot: &SessionRef) -> u64 {
    s.revision += 1;
    let revision = s.revision;
    if !s.compiling {
        s.compiling = true;
        tokio::spawn(compile_loop(slot.clone()));
    }
    revision
}

async fn compile_loop(slot: SessionRef) {
    loop {
        tokio::time::sleep(DEBOUNCE).await;
        let (revision, domain, world, automaton) = {
            let s = lock(&slot);
            (s.revision, s.domain.clone(), s.world.clone(), s.automaton.clone())
        };
        let outcome = tokio::task::spawn_blocking(move || compile_inputs(domain, world, &automaton))
            .await
            .unwrap_or_else(|e| Err(format!("compilation crashed: {e}")));
        let mut s = lock(&slot);
        s.compiled = Some(Compiled { revision, outcome });
        s.compiled_revision.send_replace(revision);
        if s.revision == revision {
            s.compiling = false;
            return;
        }
    }
}

fn compile_inputs(
    domain: Option<Domain>,
    world: Option<World>,
    automaton: &GoalAutomaton,
) -> Result<CompiledPlan, String> {
    let domain = domain.ok_or("no domain uploaded")?;
    let world = world.ok_or("no world uploaded")?;
    let task = ground_task(&domain, &world).map_err(|e| e.to_string())?;
    let init = initial_state(&world, &task).map_err(|e| e.to_string())?;
    let (plan, report) = compile_task(&task, &init, automaton, CompileOptions::default());
    Ok(CompiledPlan {
        plan: Arc::new(plan),
        task: Arc::new(task),
        report,
    })
}

/// Waits until the compilation of `revision` (or a later one) has finished,
/// or `timeout` elapses.
pub async fn wait_for(slot: &SessionRef, revision: u64, timeout: Duration) {
    let mut rx = lock(slot).compiled_revision.subscribe();
    let _ = tokio::time::timeout(timeout, rx.wait_for(|&r| r != u64::MAX && r >= revision)).await;
}
