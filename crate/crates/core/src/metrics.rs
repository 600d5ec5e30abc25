//! Plan-quality measures against a scenario's objectives.
//!
//! * The runtime score counts objectives met in an execution trace's final state.
//! * The feasibility score is the best runtime score over every way execution
//!   could unfold: any interleaving of robot steps with human actions, and any
//!   choice among the conditionals that actually hold when the robot waits.
//! * Human effort is the fewest human actions, over those same interleavings,
//!   after which execution comes to rest with every objective met.
//!
//! Both searches run over joint configurations (world facts, plan position,
//! session status). Robot moves cost nothing, human actions cost one, and the
//! human may keep acting after the robot has finished.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::atom::{AtomSet, GroundPredicate};
use crate::compiler::{BranchingPlan, NodeId, PlanStatus};
use crate::domain::{
    ground_action_schema, parse_action, ActionSchema, Domain, DomainError, GroundAction, GroundTask, GroundingError,
};
use crate::executor::{ExecutionSession, ExecutionTrace, SessionOptions, SessionStatus};
use crate::world::World;

/// Default cap on joint configurations explored by one search.
pub const DEFAULT_MAX_CONFIGS: usize = 500_000;

/// Kinds whose instances a constrained human can only use when listed as reachable.
const PLACE_KINDS: [&str; 3] = ["surface", "container", "region"];

/// Where a constrained human may act.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HumanConstraints {
    /// Surfaces, containers and regions within the human's reach.
    pub reachable: BTreeSet<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Scenario {
    pub objectives: Vec<AtomSet>,
    pub human_actions: Vec<ActionSchema>,
    pub constraints: Option<HumanConstraints>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct ScenarioDoc {
    objectives: Vec<AtomSet>,
    #[serde(default)]
    human_actions: Vec<String>,
    #[serde(default)]
    constraints: Option<HumanConstraints>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error("invalid scenario document at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("human action {index}: {error}")]
    Action { index: usize, error: DomainError },
    #[error("human action `{0}` shares its name with a robot action")]
    NameClash(String),
    #[error("objective {index} uses atoms outside the predicate universe: {}", crate::atom::display_set(.atoms))]
    UnknownAtoms { index: usize, atoms: Vec<GroundPredicate> },
    #[error(transparent)]
    Grounding(#[from] GroundingError),
}

/// Reads a scenario; human actions are `(:action ...)` blocks over `domain`'s predicates.
pub fn parse_scenario(text: &str, domain: &Domain) -> Result<Scenario, ScenarioError> {
    let doc: ScenarioDoc = serde_json::from_str(text).map_err(|e| ScenarioError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let mut human_actions = Vec::new();
    for (index, text) in doc.human_actions.iter().enumerate() {
        let schema = parse_action(text, domain).map_err(|error| ScenarioError::Action { index, error })?;
        if domain.action(&schema.name).is_some() {
            return Err(ScenarioError::NameClash(schema.name));
        }
        human_actions.push(schema);
    }
    Ok(Scenario {
        objectives: doc.objectives,
        human_actions,
        constraints: doc.constraints,
    })
}

/// Ground human actions available during a search.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct HumanModel {
    pub actions: Vec<GroundAction>,
}

impl Scenario {
    /// Grounds the human actions over the world. With `constrained`, bindings
    /// that use an unreachable surface, container or region are dropped.
    pub fn human_model(&self, domain: &Domain, world: &World, constrained: bool) -> Result<HumanModel, ScenarioError> {
        let reachable = self.constraints.as_ref().filter(|_| constrained).map(|c| &c.reachable);
        let mut actions = Vec::new();
        for schema in &self.human_actions {
            actions.extend(ground_action_schema(domain, world, schema, |binding| {
                let Some(reachable) = reachable else { return true };
                schema.params.iter().zip(binding).all(|(p, arg)| {
                    let is_place = domain.root_kind(&p.kind).is_some_and(|k| PLACE_KINDS.contains(&k));
                    !is_place || reachable.contains(*arg)
                })
            })?);
        }
        Ok(HumanModel { actions })
    }

    /// Objectives whose atoms are not part of `task`'s universe.
    pub fn check_objectives(&self, task: &GroundTask) -> Result<(), ScenarioError> {
        for (index, o) in self.objectives.iter().enumerate() {
            let atoms = task.unknown_atoms(o);
            if !atoms.is_empty() {
                return Err(ScenarioError::UnknownAtoms { index, atoms });
            }
        }
        Ok(())
    }
}

/// Objectives met out of all objectives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Score {
    pub value: u32,
    pub max: u32,
}

impl fmt::Display for Score {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.value, self.max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Effort {
    Actions(u32),
    Unachievable,
}

impl fmt::Display for Effort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Effort::Actions(n) => write!(f, "{n}"),
            Effort::Unachievable => f.write_str("UNACHIEVABLE"),
        }
    }
}

impl Serialize for Effort {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Effort::Actions(n) => s.serialize_u32(*n),
            Effort::Unachievable => s.serialize_str("UNACHIEVABLE"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("a plan that failed to compile cannot be scored")]
    Blocked,
    #[error("search exceeded its budget after {explored} configurations")]
    ResourceLimit { explored: usize },
}

fn met(objectives: &[AtomSet], facts: &AtomSet) -> u32 {
    objectives.iter().filter(|o| o.is_subset(facts)).count() as u32
}

fn max_of(objectives: &[AtomSet]) -> u32 {
    objectives.len() as u32
}

/// Objectives holding in the trace's final state.
pub fn runtime_score(trace: &ExecutionTrace, objectives: &[AtomSet]) -> Score {
    Score {
        value: met(objectives, &trace.final_state),
        max: max_of(objectives),
    }
}

type ConfigKey = (AtomSet, NodeId, SessionStatus);

fn key(s: &ExecutionSession) -> ConfigKey {
    (s.perceived().facts().clone(), s.cursor(), s.status())
}

/// Shared inputs of the joint searches.
pub struct JointSearch<'a> {
    plan: Arc<BranchingPlan>,
    task: Arc<GroundTask>,
    human: &'a HumanModel,
    max_configs: usize,
}

impl<'a> JointSearch<'a> {
    pub fn new(plan: Arc<BranchingPlan>, task: Arc<GroundTask>, human: &'a HumanModel) -> Self {
        JointSearch {
            plan,
            task,
            human,
            max_configs: DEFAULT_MAX_CONFIGS,
        }
    }

    pub fn with_max_configs(mut self, max_configs: usize) -> Self {
        self.max_configs = max_configs;
        self
    }

    fn start(&self) -> Result<ExecutionSession, MetricsError> {
        if self.plan.status() == PlanStatus::Blocked {
            return Err(MetricsError::Blocked);
        }
        let options = SessionOptions {
            record: false,
            ..SessionOptions::default()
        };
        ExecutionSession::start(self.plan.clone(), self.task.clone(), options).map_err(|_| MetricsError::Blocked)
    }

    /// What the robot can do next. Waiting robots may take any branch whose
    /// conditional currently holds, or the else-branch when none does.
    fn robot_moves(&self, s: &ExecutionSession) -> Vec<ExecutionSession> {
        match s.status() {
            SessionStatus::Running => {
                let mut next = s.clone();
                next.step().expect("running sessions can step");
                vec![next]
            }
            SessionStatus::Waiting => {
                let facts = s.perceived().facts();
                let options = s.pending_conditionals();
                let mut enabled: Vec<&AtomSet> =
                    options.iter().filter(|p| !p.is_empty() && p.is_subset(facts)).collect();
                if enabled.is_empty() {
                    enabled.extend(options.iter().filter(|p| p.is_empty()));
                }
                enabled
                    .into_iter()
                    .map(|p| {
                        let mut next = s.clone();
                        next.assert_conditional(p).expect("offered conditionals are valid");
                        next
                    })
                    .collect()
            }
            SessionStatus::Halted(_) | SessionStatus::Done => Vec::new(),
        }
    }

    fn human_moves(&self, s: &ExecutionSession) -> Vec<ExecutionSession> {
        let facts = s.perceived().facts();
        self.human
            .actions
            .iter()
            .filter(|a| a.is_applicable(facts))
            .filter_map(|a| {
                let after = a.successor(facts);
                (after != *facts).then(|| {
                    let mut next = s.clone();
                    next.force_state(after);
                    next
                })
            })
            .collect()
    }

    /// Most objectives met in any configuration where execution has come to rest.
    pub fn feasibility(&self, objectives: &[AtomSet]) -> Result<Score, MetricsError> {
        let max = max_of(objectives);
        let start = self.start()?;
        let mut seen: HashSet<ConfigKey> = HashSet::from([key(&start)]);
        let mut stack = vec![start];
        let mut best = 0;
        while let Some(s) = stack.pop() {
            let robot = self.robot_moves(&s);
            if robot.is_empty() {
                best = best.max(met(objectives, s.perceived().facts()));
                if best == max {
                    break;
                }
            }
            for next in robot.into_iter().chain(self.human_moves(&s)) {
                if seen.insert(key(&next)) {
                    if seen.len() > self.max_configs {
                        return Err(MetricsError::ResourceLimit { explored: seen.len() });
                    }
                    stack.push(next);
                }
            }
        }
        Ok(Score { value: best, max })
    }

    /// Fewest human actions before execution rests with all objectives met.
    pub fn effort(&self, objectives: &[AtomSet]) -> Result<Effort, MetricsError> {
        let start = self.start()?;
        let mut dist: HashMap<ConfigKey, u32> = HashMap::from([(key(&start), 0)]);
        let mut queue = VecDeque::from([(0u32, start)]);
        while let Some((d, s)) = queue.pop_front() {
            if dist.get(&key(&s)).is_some_and(|&best| best < d) {
                continue;
            }
            let robot = self.robot_moves(&s);
            if robot.is_empty() && met(objectives, s.perceived().facts()) == max_of(objectives) {
                return Ok(Effort::Actions(d));
            }
            let moves = robot
                .into_iter()
                .map(|n| (d, n))
                .chain(self.human_moves(&s).into_iter().map(|n| (d + 1, n)));
            for (cost, next) in moves {
                let k = key(&next);
                if dist.get(&k).is_some_and(|&best| best <= cost) {
                    continue;
                }
                dist.insert(k, cost);
                if dist.len() > self.max_configs {
                    return Err(MetricsError::ResourceLimit { explored: dist.len() });
                }
                if cost == d {
                    queue.push_front((cost, next));
                } else {
                    queue.push_back((cost, next));
                }
            }
        }
        Ok(Effort::Unachievable)
    }
}

/// Best-case objectives met, with the human acting under `human`'s model.
pub fn feasibility_score(
    plan: Arc<BranchingPlan>,
    task: Arc<GroundTask>,
    objectives: &[AtomSet],
    human: &HumanModel,
) -> Result<Score, MetricsError> {
    JointSearch::new(plan, task, human).feasibility(objectives)
}

/// Minimum human actions for all objectives; pass the relaxed (unconstrained) model.
pub fn human_effort(
    plan: Arc<BranchingPlan>,
    task: Arc<GroundTask>,
    objectives: &[AtomSet],
    human: &HumanModel,
) -> Result<Effort, MetricsError> {
    JointSearch::new(plan, task, human).effort(objectives)
}

/// All measures for one plan, as reported by batch scoring.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Evaluation {
    /// Present only when a trace was supplied.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime: Option<Score>,
    pub feasibility: Score,
    pub effort: Effort,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvaluationError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Scores `plan` against `scenario`: feasibility under the scenario's human
/// constraints, effort under the unconstrained human, and the runtime score of
/// `trace` when given.
pub fn evaluate(
    plan: Arc<BranchingPlan>,
    task: Arc<GroundTask>,
    scenario: &Scenario,
    domain: &Domain,
    world: &World,
    trace: Option<&ExecutionTrace>,
) -> Result<Evaluation, EvaluationError> {
    scenario.check_objectives(&task)?;
    let constrained = scenario.human_model(domain, world, true)?;
    let relaxed = scenario.human_model(domain, world, false)?;
    let feasibility = feasibility_score(plan.clone(), task.clone(), &scenario.objectives, &constrained)?;
    let effort = human_effort(plan, task, &scenario.objectives, &relaxed)?;
    Ok(Evaluation {
        runtime: trace.map(|t| runtime_score(t, &scenario.objectives)),
        feasibility,
        effort,
    })
}
