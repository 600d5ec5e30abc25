//! Step-driven simulation of plan execution with replanning.
//!
//! The robot walks the branching plan one action node at a time. Each action is
//! treated as the goal of reaching its end effects: if the action still applies
//! to the perceived state it is executed as is; if its effects already hold
//! nothing happens; otherwise a short local plan is searched for. At branch
//! points the session waits until a conditional is asserted. Deviations change
//! the perceived state between steps; the session halts when a local replan
//! proves the next effect unreachable.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::atom::{AtomSet, GroundPredicate};
use crate::compiler::{BranchError, BranchingPlan, NodeId, PlanStatus, ROOT_NODE};
use crate::domain::{GroundAction, GroundTask};
use crate::planner::{find_plan_for, Goal, Limits, PlanResult};
use crate::world::WorldState;

/// Expansion budget for local replans.
pub const DEFAULT_REPLAN_EXPANSIONS: u64 = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum HaltReason {
    /// A local replan proved the next action's effects unreachable.
    UnreachableEffect,
    /// A local replan ran out of budget.
    ReplanLimit,
    /// Execution entered a branch that was omitted at compile time.
    OmittedBranch,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "state", content = "reason", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SessionStatus {
    Running,
    Waiting,
    Halted(HaltReason),
    Done,
}

impl SessionStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, SessionStatus::Halted(_) | SessionStatus::Done)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EventKind {
    ActionDone,
    Replanned,
    WaitStarted,
    ConditionalMet,
    Deviation,
    Halt,
    TaskDone,
}

/// One entry of the execution trace. `added` / `removed` record exactly how
/// the perceived state changed, so traces can be replayed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExecutionEvent {
    /// Position in the trace; strictly increasing.
    pub seq: u64,
    /// Number of robot steps taken when the event occurred.
    pub step: u64,
    pub kind: EventKind,
    /// Plan node the robot is at after the event.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node: Option<NodeId>,
    /// The plan action the event concerns.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<String>,
    /// Local sequence actually executed, for replans.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replan: Option<Vec<String>>,
    /// Asserted conditional, or the labels waited on.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conditionals: Option<Vec<AtomSet>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<HaltReason>,
    #[serde(default, skip_serializing_if = "AtomSet::is_empty")]
    pub added: AtomSet,
    #[serde(default, skip_serializing_if = "AtomSet::is_empty")]
    pub removed: AtomSet,
}

/// The full record of a session.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExecutionTrace {
    pub initial_state: AtomSet,
    pub events: Vec<ExecutionEvent>,
    pub final_state: AtomSet,
    pub status: SessionStatus,
}

impl ExecutionTrace {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("trace serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Folds the recorded deltas over the initial state.
    pub fn replay(&self) -> AtomSet {
        let mut facts = self.initial_state.clone();
        for e in &self.events {
            for r in &e.removed {
                facts.remove(r);
            }
            facts.extend(e.added.iter().cloned());
        }
        facts
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExecutionError {
    #[error("a plan that failed to compile cannot be executed")]
    Blocked,
    #[error("the session has finished ({0:?})")]
    Terminal(SessionStatus),
    #[error("the session is waiting for a conditional")]
    Waiting,
    #[error("the session is not waiting for a conditional")]
    NotWaiting,
    #[error(transparent)]
    InvalidConditional(BranchError),
    #[error("atoms outside the predicate universe: {}", crate::atom::display_set(.0))]
    UnknownAtoms(Vec<GroundPredicate>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SessionOptions {
    pub replan_expansions: u64,
    /// Keep the event history; searches over many session copies turn it off.
    pub record: bool,
}

impl Default for SessionOptions {
    fn default() -> Self {
        SessionOptions {
            replan_expansions: DEFAULT_REPLAN_EXPANSIONS,
            record: true,
        }
    }
}

/// A running simulation. Cloning is cheap: the plan and task are shared.
#[derive(Clone, Debug)]
pub struct ExecutionSession {
    plan: Arc<BranchingPlan>,
    task: Arc<GroundTask>,
    options: SessionOptions,
    perceived: WorldState,
    cursor: NodeId,
    status: SessionStatus,
    steps: u64,
    initial: AtomSet,
    events: Vec<ExecutionEvent>,
}

/// Starts executing `plan` from its root state.
pub fn start_session(plan: Arc<BranchingPlan>, task: Arc<GroundTask>) -> Result<ExecutionSession, ExecutionError> {
    ExecutionSession::start(plan, task, SessionOptions::default())
}

impl ExecutionSession {
    pub fn start(
        plan: Arc<BranchingPlan>,
        task: Arc<GroundTask>,
        options: SessionOptions,
    ) -> Result<Self, ExecutionError> {
        if plan.status() == PlanStatus::Blocked {
            return Err(ExecutionError::Blocked);
        }
        let perceived = plan.root().post_state.clone();
        Ok(ExecutionSession {
            initial: perceived.facts().clone(),
            plan,
            task,
            options,
            perceived,
            cursor: ROOT_NODE,
            status: SessionStatus::Running,
            steps: 0,
            events: Vec::new(),
        })
    }

    pub fn plan(&self) -> &BranchingPlan {
        &self.plan
    }

    pub fn perceived(&self) -> &WorldState {
        &self.perceived
    }

    pub fn cursor(&self) -> NodeId {
        self.cursor
    }

    pub fn status(&self) -> SessionStatus {
        self.status
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn events(&self) -> &[ExecutionEvent] {
        &self.events
    }

    /// Conditionals the session is waiting on (empty unless WAITING).
    pub fn pending_conditionals(&self) -> Vec<AtomSet> {
        match self.status {
            SessionStatus::Waiting => self
                .plan
                .branch_options(self.cursor)
                .into_iter()
                .map(|(p, _)| p)
                .collect(),
            _ => Vec::new(),
        }
    }

    pub fn trace(&self) -> ExecutionTrace {
        ExecutionTrace {
            initial_state: self.initial.clone(),
            events: self.events.clone(),
            final_state: self.perceived.facts().clone(),
            status: self.status,
        }
    }

    fn blank(&self, kind: EventKind) -> ExecutionEvent {
        ExecutionEvent {
            seq: self.events.len() as u64,
            step: self.steps,
            kind,
            node: Some(self.cursor),
            action: None,
            replan: None,
            conditionals: None,
            reason: None,
            added: AtomSet::new(),
            removed: AtomSet::new(),
        }
    }

    fn emit(&mut self, event: ExecutionEvent, out: &mut Vec<ExecutionEvent>) {
        if self.options.record {
            self.events.push(event.clone());
        }
        out.push(event);
    }

    fn halt(&mut self, reason: HaltReason, action: Option<String>, out: &mut Vec<ExecutionEvent>) {
        self.status = SessionStatus::Halted(reason);
        let mut e = self.blank(EventKind::Halt);
        e.reason = Some(reason);
        e.action = action;
        self.emit(e, out);
    }

    /// Replaces the perceived state, returning the `(added, removed)` delta.
    fn set_perceived(&mut self, next: AtomSet) -> (AtomSet, AtomSet) {
        let old = self.perceived.facts();
        let added = next.difference(old).cloned().collect();
        let removed = old.difference(&next).cloned().collect();
        self.perceived = WorldState::new(next);
        (added, removed)
    }

    /// Overwrites the perceived state without recording an event, whatever the
    /// status; used by searches that model outside agents.
    pub(crate) fn force_state(&mut self, facts: AtomSet) {
        self.perceived = WorldState::new(facts);
    }

    /// Moves through unconditional continuations until the next action node
    /// is up, the plan ends, or a branch point is reached.
    fn settle(&mut self, out: &mut Vec<ExecutionEvent>) {
        while self.status == SessionStatus::Running {
            if self.plan.is_branch_point(self.cursor) {
                self.status = SessionStatus::Waiting;
                let mut e = self.blank(EventKind::WaitStarted);
                e.conditionals = Some(self.pending_conditionals());
                self.emit(e, out);
                return;
            }
            let node = self.plan.node(self.cursor).expect("cursor is a plan node");
            match node.children.first() {
                Some(&c) if self.plan.node(c).is_some_and(|n| n.is_entry()) => self.cursor = c,
                Some(_) => return,
                None if self.plan.omitted_at(self.cursor).next().is_some() => {
                    self.halt(HaltReason::OmittedBranch, None, out);
                }
                None => {
                    self.status = SessionStatus::Done;
                    let e = self.blank(EventKind::TaskDone);
                    self.emit(e, out);
                }
            }
        }
    }

    fn check_live(&self) -> Result<(), ExecutionError> {
        if self.status.is_terminal() {
            Err(ExecutionError::Terminal(self.status))
        } else {
            Ok(())
        }
    }

    /// Executes the next action node (passing silently through unconditional
    /// branch entries) and reports what happened.
    pub fn step(&mut self) -> Result<Vec<ExecutionEvent>, ExecutionError> {
        self.check_live()?;
        if self.status == SessionStatus::Waiting {
            return Err(ExecutionError::Waiting);
        }
        let mut out = Vec::new();
        self.settle(&mut out);
        if self.status != SessionStatus::Running {
            return Ok(out);
        }
        let next = self.plan.node(self.cursor).expect("cursor is a plan node").children[0];
        let action = self
            .plan
            .node(next)
            .and_then(|n| n.action.clone())
            .expect("settle stops before an action node");
        self.steps += 1;
        self.execute(next, &action, &mut out);
        if self.status == SessionStatus::Running {
            self.settle(&mut out);
        }
        Ok(out)
    }

    fn execute(&mut self, node: NodeId, action: &GroundAction, out: &mut Vec<ExecutionEvent>) {
        let label = action.to_string();
        let facts = self.perceived.facts();
        let goal = Goal {
            holds: action.add.clone(),
            absent: action.del.clone(),
        };
        let executed: Option<Vec<GroundAction>> = if action.is_applicable(facts) {
            Some(vec![action.clone()])
        } else if goal.is_met(facts) {
            Some(Vec::new())
        } else {
            let limits = Limits::greedy(self.options.replan_expansions);
            match find_plan_for(&self.task, &self.perceived, &goal, limits) {
                PlanResult::Solved(p) => Some(p.actions),
                PlanResult::Unsolvable => {
                    self.halt(HaltReason::UnreachableEffect, Some(label), out);
                    return;
                }
                PlanResult::ResourceLimit { .. } => {
                    self.halt(HaltReason::ReplanLimit, Some(label), out);
                    return;
                }
            }
        };
        let executed = executed.expect("halts returned early");
        let replanned = executed.len() != 1 || executed[0] != *action;
        let mut facts = self.perceived.facts().clone();
        for a in &executed {
            facts = a.successor(&facts);
        }
        self.cursor = node;
        if replanned {
            let mut e = self.blank(EventKind::Replanned);
            e.action = Some(label.clone());
            e.replan = Some(executed.iter().map(ToString::to_string).collect());
            self.emit(e, out);
        }
        let (added, removed) = self.set_perceived(facts);
        let mut e = self.blank(EventKind::ActionDone);
        e.action = Some(label);
        e.added = added;
        e.removed = removed;
        self.emit(e, out);
    }

    /// Changes the perceived state from outside (the environment or a person).
    pub fn inject_deviation(&mut self, add: &AtomSet, remove: &AtomSet) -> Result<Vec<ExecutionEvent>, ExecutionError> {
        self.check_live()?;
        let unknown = self.task.unknown_atoms(add.iter().chain(remove));
        if !unknown.is_empty() {
            return Err(ExecutionError::UnknownAtoms(unknown));
        }
        let mut facts: AtomSet = self.perceived.facts().difference(remove).cloned().collect();
        facts.extend(add.iter().cloned());
        let (added, removed) = self.set_perceived(facts);
        let mut e = self.blank(EventKind::Deviation);
        e.added = added;
        e.removed = removed;
        let mut out = Vec::new();
        self.emit(e, &mut out);
        Ok(out)
    }

    /// Confirms one of the waited-on conditionals (the empty set selects the
    /// else-branch), asserting its atoms and entering that branch.
    pub fn assert_conditional(&mut self, conditional: &AtomSet) -> Result<Vec<ExecutionEvent>, ExecutionError> {
        self.check_live()?;
        if self.status != SessionStatus::Waiting {
            return Err(ExecutionError::NotWaiting);
        }
        let mut out = Vec::new();
        match self.plan.choose(self.cursor, conditional) {
            Ok(child) => {
                let mut facts = self.perceived.facts().clone();
                facts.extend(conditional.iter().cloned());
                let (added, removed) = self.set_perceived(facts);
                self.cursor = child;
                self.status = SessionStatus::Running;
                let mut e = self.blank(EventKind::ConditionalMet);
                e.conditionals = Some(vec![conditional.clone()]);
                e.added = added;
                e.removed = removed;
                self.emit(e, &mut out);
                self.settle(&mut out);
            }
            Err(BranchError::OmittedBranch { .. }) => {
                let mut e = self.blank(EventKind::ConditionalMet);
                e.conditionals = Some(vec![conditional.clone()]);
                self.emit(e, &mut out);
                self.halt(HaltReason::OmittedBranch, None, &mut out);
            }
            Err(e) => return Err(ExecutionError::InvalidConditional(e)),
        }
        Ok(out)
    }

    /// Steps until the session stops running (waiting, halted or done).
    pub fn run_until_blocked(&mut self) -> Vec<ExecutionEvent> {
        let mut out = Vec::new();
        while self.status == SessionStatus::Running {
            out.extend(self.step().expect("running sessions can step"));
        }
        out
    }
}

/// Outside interventions for a scripted simulation.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Script {
    pub events: Vec<ScriptEvent>,
}

/// Fires once the robot has taken `step` steps, in file order among events
/// for the same step.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptEvent {
    pub step: u64,
    #[serde(flatten)]
    pub action: ScriptAction,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ScriptAction {
    Deviation {
        #[serde(default)]
        add: AtomSet,
        #[serde(default)]
        remove: AtomSet,
    },
    Conditional {
        #[serde(default)]
        conditional: AtomSet,
    },
}

impl Script {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Runs the session to completion, applying scripted events as their step
/// comes up. Stops early when the session waits and the script has nothing
/// more for the current step.
pub fn simulate(session: &mut ExecutionSession, script: &Script) -> Result<(), ExecutionError> {
    let mut events = script.events.clone();
    events.sort_by_key(|e| e.step); // stable: file order within a step
    let mut pending = events.into_iter().peekable();
    loop {
        while let Some(e) = pending.next_if(|e| e.step <= session.steps()) {
            if session.status().is_terminal() {
                break;
            }
            match &e.action {
                ScriptAction::Deviation { add, remove } => session.inject_deviation(add, remove)?,
                ScriptAction::Conditional { conditional } => session.assert_conditional(conditional)?,
            };
        }
        match session.status() {
            SessionStatus::Running => {
                session.step()?;
            }
            SessionStatus::Waiting | SessionStatus::Halted(_) | SessionStatus::Done => return Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atom::atom;
    use crate::automaton::{GoalAutomaton, ROOT_ID};
    use crate::compiler::{compile_task, CompileOptions};

    fn set(xs: &[&str]) -> AtomSet {
        xs.iter().map(|x| atom(x, [])).collect()
    }

    fn act(name: &str, pre: &[&str], add: &[&str], del: &[&str]) -> GroundAction {
        GroundAction::new(name, vec![], set(pre), AtomSet::new(), set(add), set(del))
    }

    /// A token travels a → b → c and can step back from c to b.
    fn task() -> Arc<GroundTask> {
        Arc::new(
            GroundTask::from_parts(
                set(&["a", "b", "c", "go"]).into_iter().collect(),
                vec![
                    act("ab", &["a"], &["b"], &["a"]),
                    act("bc", &["b"], &["c"], &["b"]),
                    act("c-to-b", &["c"], &["b"], &["c"]),
                ],
            )
            .unwrap(),
        )
    }

    fn plan(task: &GroundTask) -> Arc<BranchingPlan> {
        let mut a = GoalAutomaton::new();
        a.add_checkpoint(ROOT_ID, "at-b", "at-b").unwrap();
        a.set_goals("at-b", set(&["b"])).unwrap();
        a.add_checkpoint("at-b", "at-c", "at-c").unwrap();
        a.set_goals("at-c", set(&["c"])).unwrap();
        a.set_conditional("at-b", "at-c", set(&["go"])).unwrap();
        let (plan, _) = compile_task(task, &WorldState::new(set(&["a"])), &a, CompileOptions::default());
        Arc::new(plan)
    }

    fn kinds(events: &[ExecutionEvent]) -> Vec<EventKind> {
        events.iter().map(|e| e.kind).collect()
    }

    #[test]
    fn unperturbed_run() {
        let task = task();
        let plan = plan(&task);
        let mut s = start_session(plan.clone(), task).unwrap();
        assert_eq!(s.status(), SessionStatus::Running);
        assert_eq!(
            kinds(&s.step().unwrap()),
            [EventKind::ActionDone, EventKind::WaitStarted]
        );
        assert_eq!(s.step(), Err(ExecutionError::Waiting));
        assert_eq!(s.pending_conditionals(), vec![set(&["go"])]);
        assert_eq!(
            kinds(&s.assert_conditional(&set(&["go"])).unwrap()),
            [EventKind::ConditionalMet]
        );
        assert_eq!(kinds(&s.step().unwrap()), [EventKind::ActionDone, EventKind::TaskDone]);
        assert_eq!(s.status(), SessionStatus::Done);
        let leaf = plan.node_of("at-c").unwrap();
        assert_eq!(s.perceived(), plan.state_after(leaf).unwrap());
        assert_eq!(s.trace().replay(), *s.perceived().facts());
        assert!(matches!(s.step(), Err(ExecutionError::Terminal(SessionStatus::Done))));
    }

    #[test]
    fn deviation_triggers_replan() {
        let task = task();
        let mut s = start_session(plan(&task), task).unwrap();
        s.step().unwrap();
        s.assert_conditional(&set(&["go"])).unwrap();
        // the token is knocked back to a: bc cannot run, the local plan ab, bc can
        s.inject_deviation(&set(&["a"]), &set(&["b"])).unwrap();
        let events = s.step().unwrap();
        assert_eq!(
            kinds(&events),
            [EventKind::Replanned, EventKind::ActionDone, EventKind::TaskDone]
        );
        assert_eq!(events[0].replan.as_ref().unwrap(), &["ab()", "bc()"]);
        assert_eq!(s.trace().replay(), *s.perceived().facts());
    }

    #[test]
    fn effects_already_present_need_nothing() {
        let task = task();
        let mut s = start_session(plan(&task), task).unwrap();
        s.inject_deviation(&set(&["b"]), &set(&["a"])).unwrap();
        let events = s.step().unwrap();
        assert_eq!(
            kinds(&events),
            [EventKind::Replanned, EventKind::ActionDone, EventKind::WaitStarted]
        );
        assert_eq!(events[0].replan.as_ref().unwrap().len(), 0);
    }

    #[test]
    fn unrecoverable_deviation_halts() {
        let task = task();
        let mut s = start_session(plan(&task), task).unwrap();
        s.inject_deviation(&AtomSet::new(), &set(&["a"])).unwrap();
        let events = s.step().unwrap();
        assert_eq!(kinds(&events), [EventKind::Halt]);
        assert_eq!(s.status(), SessionStatus::Halted(HaltReason::UnreachableEffect));
        assert!(s.inject_deviation(&set(&["a"]), &AtomSet::new()).is_err());
    }

    #[test]
    fn bad_assertions_and_atoms_rejected() {
        let task = task();
        let mut s = start_session(plan(&task), task).unwrap();
        assert_eq!(s.assert_conditional(&set(&["go"])), Err(ExecutionError::NotWaiting));
        s.step().unwrap();
        assert!(matches!(
            s.assert_conditional(&set(&["stop"])),
            Err(ExecutionError::InvalidConditional(_))
        ));
        assert!(matches!(
            s.inject_deviation(&set(&["ghost"]), &AtomSet::new()),
            Err(ExecutionError::UnknownAtoms(_))
        ));
        let e = s.inject_deviation(&AtomSet::new(), &AtomSet::new()).unwrap();
        assert!(e[0].added.is_empty() && e[0].removed.is_empty());
    }

    #[test]
    fn blocked_plans_refused() {
        let task = task();
        let mut a = GoalAutomaton::new();
        a.add_checkpoint(ROOT_ID, "x", "x").unwrap();
        a.add_checkpoint(ROOT_ID, "y", "y").unwrap();
        let (plan, _) = compile_task(&task, &WorldState::new(set(&["a"])), &a, CompileOptions::default());
        assert_eq!(
            start_session(Arc::new(plan), task).unwrap_err(),
            ExecutionError::Blocked
        );
    }

    #[test]
    fn omitted_branch_halts() {
        let task = task();
        let mut a = GoalAutomaton::new();
        a.add_checkpoint(ROOT_ID, "at-b", "at-b").unwrap();
        a.set_goals("at-b", set(&["b"])).unwrap();
        a.add_checkpoint("at-b", "never", "never").unwrap();
        a.set_goals("never", set(&["a"])).unwrap();
        a.set_conditional("at-b", "never", set(&["go"])).unwrap();
        let (plan, _) = compile_task(&task, &WorldState::new(set(&["a"])), &a, CompileOptions::default());
        let mut s = start_session(Arc::new(plan), task).unwrap();
        s.step().unwrap();
        assert_eq!(s.status(), SessionStatus::Waiting);
        let events = s.assert_conditional(&set(&["go"])).unwrap();
        assert_eq!(kinds(&events), [EventKind::ConditionalMet, EventKind::Halt]);
        assert_eq!(s.status(), SessionStatus::Halted(HaltReason::OmittedBranch));
    }

    #[test]
    fn scripted_simulation() {
        let task = task();
        let mut s = start_session(plan(&task), task).unwrap();
        let script = Script::from_json(
            r#"{"events": [
                {"step": 1, "kind": "deviation", "add": ["a"], "remove": ["b"]},
                {"step": 1, "kind": "conditional", "conditional": ["go"]}
            ]}"#,
        )
        .unwrap();
        simulate(&mut s, &script).unwrap();
        assert_eq!(s.status(), SessionStatus::Done);
        let kinds = kinds(s.events());
        assert_eq!(kinds.iter().filter(|k| **k == EventKind::Replanned).count(), 1);
        let task = self::task();
        let mut waiting = start_session(plan(&task), task).unwrap();
        simulate(&mut waiting, &Script::default()).unwrap();
        assert_eq!(waiting.status(), SessionStatus::Waiting);
    }

    #[test]
    fn trace_json_round_trip() {
        let task = task();
        let mut s = start_session(plan(&task), task).unwrap();
        s.step().unwrap();
        s.assert_conditional(&set(&["go"])).unwrap();
        s.step().unwrap();
        let trace = s.trace();
        let back = ExecutionTrace::from_json(&trace.to_json()).unwrap();
        assert_eq!(back, trace);
        assert!(trace.events.windows(2).all(|w| w[0].seq < w[1].seq));
    }
}
