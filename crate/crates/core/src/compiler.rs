//! Compiles a goal automaton into a branching plan.
//!
//! Every automaton transition `c_i --p--> c_j` becomes an *entry node* below the
//! node mapped to `c_i`; its post-state is the parent's state with `p` asserted.
//! Below the entry hangs the shortest action chain reaching `c_j`'s goals, and
//! `c_j` maps to the chain's last node (or the entry itself for an empty chain).
//! Because each transition owns its entry node, the checkpoint map is always
//! injective, and it misses every node of a non-empty chain except the last.
//!
//! Checkpoints whose goals cannot be reached are omitted together with their
//! subtrees; automata with ambiguous (underspecified) transitions do not
//! compile at all.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::atom::AtomSet;
use crate::automaton::{GoalAutomaton, IssueCode, ValidationIssue};
use crate::domain::{ground_task, Domain, GroundAction, GroundTask, GroundingError};
use crate::planner::{find_plan, Limits, Mode, PlanResult, DEFAULT_MAX_EXPANSIONS};
use crate::world::{initial_state, InitialStateError, World, WorldState};

pub type NodeId = usize;

pub const ROOT_NODE: NodeId = 0;

/// A node of the branching plan: the root, a branch entry, or an action.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlanNode {
    pub id: NodeId,
    pub parent: Option<NodeId>,
    /// Set on action nodes.
    pub action: Option<GroundAction>,
    /// Set on entry nodes; empty for an else-transition.
    pub conditional: Option<AtomSet>,
    /// Automaton transition `(from, to)` an entry node opens.
    pub transition: Option<(String, String)>,
    /// World state after this node.
    pub post_state: WorldState,
    pub children: Vec<NodeId>,
}

impl PlanNode {
    pub fn is_entry(&self) -> bool {
        self.conditional.is_some()
    }

    pub fn is_root(&self) -> bool {
        self.parent.is_none()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PlanStatus {
    Complete,
    Partial,
    Blocked,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum OmissionReason {
    /// The checkpoint's goals are unreachable from its entry state.
    OmittedConflict,
    /// An ancestor checkpoint was omitted.
    OmittedAncestor,
    /// The planner ran out of budget on this segment.
    ResourceLimit,
}

/// A checkpoint left out of the plan.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Omission {
    pub checkpoint: String,
    pub reason: OmissionReason,
    /// Checkpoint the omitted transition leaves from.
    pub parent: String,
    /// Plan node the transition would have hung from, when the parent is mapped.
    pub anchor: Option<NodeId>,
    pub conditional: AtomSet,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CheckpointOutcome {
    Mapped { node: NodeId },
    OmittedConflict,
    OmittedAncestor,
    ResourceLimit,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CompilationReport {
    pub status: PlanStatus,
    pub outcomes: BTreeMap<String, CheckpointOutcome>,
    pub issues: Vec<ValidationIssue>,
    /// Planner node expansions spent over all segments.
    pub expanded: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CompileOptions {
    /// Expansion budget shared by all segments.
    pub max_expansions: u64,
    pub mode: Mode,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions {
            max_expansions: DEFAULT_MAX_EXPANSIONS,
            mode: Mode::Optimal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompileError {
    #[error(transparent)]
    Grounding(#[from] GroundingError),
    #[error(transparent)]
    InitialState(#[from] InitialStateError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BranchError {
    #[error("unknown plan node {0}")]
    UnknownNode(NodeId),
    #[error("node {node} has no branch labeled [{}]", crate::atom::display_set(.conditional))]
    InvalidChoice { node: NodeId, conditional: AtomSet },
    #[error("the branch labeled [{}] at node {node} was omitted from the plan", crate::atom::display_set(.conditional))]
    OmittedBranch { node: NodeId, conditional: AtomSet },
    #[error("{0} choices left over after reaching a leaf")]
    UnusedChoices(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanFileError {
    #[error("invalid plan document at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("plan node {node} refers to unknown action `{label}`")]
    UnknownAction { node: NodeId, label: String },
    #[error("malformed plan: {0}")]
    Structure(String),
}

/// The compiled tree of plan nodes plus the checkpoint → node map.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BranchingPlan {
    nodes: Vec<PlanNode>,
    checkpoint_map: BTreeMap<String, NodeId>,
    omitted: Vec<Omission>,
    status: PlanStatus,
}

impl BranchingPlan {
    fn with_root(init: WorldState) -> Self {
        BranchingPlan {
            nodes: vec![PlanNode {
                id: ROOT_NODE,
                parent: None,
                action: None,
                conditional: None,
                transition: None,
                post_state: init,
                children: Vec::new(),
            }],
            checkpoint_map: BTreeMap::new(),
            omitted: Vec::new(),
            status: PlanStatus::Complete,
        }
    }

    fn push(&mut self, parent: NodeId, mut node: PlanNode) -> NodeId {
        let id = self.nodes.len();
        node.id = id;
        node.parent = Some(parent);
        self.nodes.push(node);
        self.nodes[parent].children.push(id);
        id
    }

    pub fn nodes(&self) -> &[PlanNode] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> Option<&PlanNode> {
        self.nodes.get(id)
    }

    pub fn root(&self) -> &PlanNode {
        &self.nodes[ROOT_NODE]
    }

    pub fn status(&self) -> PlanStatus {
        self.status
    }

    pub fn omitted(&self) -> &[Omission] {
        &self.omitted
    }

    pub fn checkpoint_map(&self) -> &BTreeMap<String, NodeId> {
        &self.checkpoint_map
    }

    /// Stored post-state of a node.
    pub fn state_after(&self, id: NodeId) -> Result<&WorldState, BranchError> {
        self.node(id).map(|n| &n.post_state).ok_or(BranchError::UnknownNode(id))
    }

    pub fn node_of(&self, checkpoint: &str) -> Option<NodeId> {
        self.checkpoint_map.get(checkpoint).copied()
    }

    pub fn checkpoint_of(&self, node: NodeId) -> Option<&str> {
        self.checkpoint_map
            .iter()
            .find(|(_, n)| **n == node)
            .map(|(c, _)| c.as_str())
    }

    /// `id` and all of its descendants, preorder.
    pub fn subtree(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(n) = stack.pop() {
            if let Some(node) = self.node(n) {
                out.push(n);
                stack.extend(node.children.iter().rev());
            }
        }
        out
    }

    /// True when `node` is `ancestor` or lies below it.
    pub fn is_descendant(&self, node: NodeId, ancestor: NodeId) -> bool {
        let mut cur = Some(node);
        while let Some(n) = cur {
            if n == ancestor {
                return true;
            }
            cur = self.node(n).and_then(|x| x.parent);
        }
        false
    }

    /// Omitted transitions that would have hung from `node`.
    pub fn omitted_at(&self, node: NodeId) -> impl Iterator<Item = &Omission> {
        self.omitted.iter().filter(move |o| o.anchor == Some(node))
    }

    /// Whether execution must wait for a conditional at `node`: it has several
    /// continuations (compiled or omitted), or a conditional one. A lone
    /// else-continuation is followed without waiting.
    pub fn is_branch_point(&self, node: NodeId) -> bool {
        let options = self.branch_options(node);
        options.len() > 1 || options.iter().any(|(p, _)| !p.is_empty())
    }

    /// Labels selectable at a branch point: compiled branches first, then omitted ones.
    pub fn branch_options(&self, node: NodeId) -> Vec<(AtomSet, Option<NodeId>)> {
        let mut out: Vec<(AtomSet, Option<NodeId>)> = Vec::new();
        if let Some(n) = self.node(node) {
            for &c in &n.children {
                if let Some(p) = &self.nodes[c].conditional {
                    out.push((p.clone(), Some(c)));
                }
            }
        }
        for o in self.omitted_at(node) {
            out.push((o.conditional.clone(), None));
        }
        out
    }

    /// Selects the child of branch point `node` labeled `conditional`.
    pub fn choose(&self, node: NodeId, conditional: &AtomSet) -> Result<NodeId, BranchError> {
        let n = self.node(node).ok_or(BranchError::UnknownNode(node))?;
        if let Some(&c) = n
            .children
            .iter()
            .find(|&&c| self.nodes[c].conditional.as_ref() == Some(conditional))
        {
            return Ok(c);
        }
        if self.omitted_at(node).any(|o| o.conditional == *conditional) {
            return Err(BranchError::OmittedBranch {
                node,
                conditional: conditional.clone(),
            });
        }
        Err(BranchError::InvalidChoice {
            node,
            conditional: conditional.clone(),
        })
    }

    /// The node chain from the root following `choices` at successive branch
    /// points, stopping at the next unresolved branch point or at a leaf.
    pub fn linearize_branch(&self, choices: &[AtomSet]) -> Result<Vec<&PlanNode>, BranchError> {
        let mut out = vec![self.root()];
        let mut cur = ROOT_NODE;
        let mut choices = choices.iter();
        loop {
            let node = &self.nodes[cur];
            cur = if self.is_branch_point(cur) {
                match choices.next() {
                    Some(c) => self.choose(cur, c)?,
                    None => break,
                }
            } else {
                match node.children.first() {
                    Some(&c) => c,
                    // a leaf, or a lone omitted else-continuation
                    None => break,
                }
            };
            out.push(&self.nodes[cur]);
        }
        match choices.len() {
            0 => Ok(out),
            n => Err(BranchError::UnusedChoices(n)),
        }
    }

    /// Action chain that starts below entry node `entry`, up to the next entry or leaf.
    pub fn segment(&self, entry: NodeId) -> Vec<&PlanNode> {
        let mut out = Vec::new();
        let mut cur = entry;
        while let [only] = self.nodes[cur].children[..] {
            if self.nodes[only].is_entry() {
                break;
            }
            out.push(&self.nodes[only]);
            cur = only;
        }
        out
    }

    /// Canonical JSON form.
    pub fn to_json(&self) -> String {
        let doc = PlanDoc {
            status: self.status,
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeDoc {
                    id: n.id,
                    parent: n.parent,
                    action: n.action.as_ref().map(ToString::to_string),
                    conditional: n.conditional.clone(),
                    transition: n.transition.clone(),
                    post_state: n.post_state.facts().clone(),
                })
                .collect(),
            checkpoint_map: self.checkpoint_map.clone(),
            omitted: self.omitted.clone(),
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("plan serializes");
        s.push('\n');
        s
    }

    /// Reads a plan document, resolving action labels against `task`.
    pub fn from_json(text: &str, task: &GroundTask) -> Result<Self, PlanFileError> {
        let doc: PlanDoc = serde_json::from_str(text).map_err(|e| PlanFileError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        let structure = |m: String| Err(PlanFileError::Structure(m));
        let mut nodes: Vec<PlanNode> = Vec::with_capacity(doc.nodes.len());
        for (i, n) in doc.nodes.into_iter().enumerate() {
            if n.id != i {
                return structure(format!("node at position {i} has id {}", n.id));
            }
            match n.parent {
                None if i != ROOT_NODE => return structure(format!("node {i} has no parent")),
                Some(p) if p >= i => return structure(format!("node {i} has parent {p}, which does not precede it")),
                _ => {}
            }
            let action = match n.action {
                Some(label) => Some(
                    task.action_by_label(&label)
                        .cloned()
                        .ok_or(PlanFileError::UnknownAction { node: i, label })?,
                ),
                None => None,
            };
            if action.is_some() && n.conditional.is_some() {
                return structure(format!("node {i} is both an action and a branch entry"));
            }
            if let Some(p) = n.parent {
                nodes[p].children.push(i);
            }
            nodes.push(PlanNode {
                id: i,
                parent: n.parent,
                action,
                conditional: n.conditional,
                transition: n.transition,
                post_state: WorldState::new(n.post_state),
                children: Vec::new(),
            });
        }
        if nodes.is_empty() {
            return structure("plan has no root node".into());
        }
        if let Some((c, n)) = doc.checkpoint_map.iter().find(|(_, n)| **n >= nodes.len()) {
            return structure(format!("checkpoint `{c}` maps to unknown node {n}"));
        }
        Ok(BranchingPlan {
            nodes,
            checkpoint_map: doc.checkpoint_map,
            omitted: doc.omitted,
            status: doc.status,
        })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct NodeDoc {
    id: NodeId,
    parent: Option<NodeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    action: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    conditional: Option<AtomSet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    transition: Option<(String, String)>,
    post_state: AtomSet,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct PlanDoc {
    status: PlanStatus,
    nodes: Vec<NodeDoc>,
    checkpoint_map: BTreeMap<String, NodeId>,
    omitted: Vec<Omission>,
}

/// Grounds the domain over the world and compiles the automaton.
pub fn compile(
    domain: &Domain,
    world: &World,
    automaton: &GoalAutomaton,
) -> Result<(BranchingPlan, CompilationReport), CompileError> {
    let task = ground_task(domain, world)?;
    let init = initial_state(world, &task)?;
    Ok(compile_task(&task, &init, automaton, CompileOptions::default()))
}

/// Compiles against an already grounded task.
pub fn compile_task(
    task: &GroundTask,
    init: &WorldState,
    automaton: &GoalAutomaton,
    options: CompileOptions,
) -> (BranchingPlan, CompilationReport) {
    let mut issues = automaton.validate();
    issues.extend(automaton.check_atoms(task));
    let mut plan = BranchingPlan::with_root(init.clone());
    let mut report = CompilationReport {
        status: PlanStatus::Complete,
        outcomes: BTreeMap::new(),
        issues,
        expanded: 0,
    };
    if report.issues.iter().any(ValidationIssue::is_blocking) {
        plan.status = PlanStatus::Blocked;
        report.status = PlanStatus::Blocked;
        return (plan, report);
    }
    plan.checkpoint_map.insert(automaton.root.clone(), ROOT_NODE);
    report
        .outcomes
        .insert(automaton.root.clone(), CheckpointOutcome::Mapped { node: ROOT_NODE });

    let mut compiler = Compiler {
        task,
        automaton,
        options,
        plan,
        report,
    };
    compiler.expand(&automaton.root, ROOT_NODE);
    let Compiler {
        mut plan, mut report, ..
    } = compiler;
    if !plan.omitted.is_empty() {
        plan.status = PlanStatus::Partial;
        report.status = PlanStatus::Partial;
    }
    (plan, report)
}

struct Compiler<'a> {
    task: &'a GroundTask,
    automaton: &'a GoalAutomaton,
    options: CompileOptions,
    plan: BranchingPlan,
    report: CompilationReport,
}

impl Compiler<'_> {
    /// Depth-first over the transitions leaving `checkpoint`, mapped to `node`.
    fn expand(&mut self, checkpoint: &str, node: NodeId) {
        let transitions: Vec<_> = self.automaton.outgoing(checkpoint).cloned().collect();
        for t in transitions {
            let mut entry_facts = self.plan.nodes[node].post_state.facts().clone();
            entry_facts.extend(t.conditional.iter().cloned());
            let entry_state = WorldState::new(entry_facts);
            let goals = self.automaton.goals(&t.to).cloned().unwrap_or_default();

            let remaining = self.options.max_expansions.saturating_sub(self.report.expanded);
            let result = if goals.is_subset(entry_state.facts()) {
                // nothing to plan; also keeps zero-budget compiles of trivial segments working
                None
            } else if remaining == 0 {
                Some(PlanResult::ResourceLimit { expanded: 0 })
            } else {
                let limits = Limits {
                    max_expansions: remaining,
                    max_time: None,
                    mode: self.options.mode,
                };
                Some(find_plan(self.task, &entry_state, &goals, limits))
            };
            let actions = match result {
                None => Vec::new(),
                Some(PlanResult::Solved(p)) => {
                    self.report.expanded += p.expanded;
                    p.actions.into_iter().zip(p.states).collect()
                }
                Some(PlanResult::Unsolvable) => {
                    self.omit(checkpoint, node, &t.to, &t.conditional, OmissionReason::OmittedConflict);
                    continue;
                }
                Some(PlanResult::ResourceLimit { expanded }) => {
                    self.report.expanded += expanded;
                    self.omit(checkpoint, node, &t.to, &t.conditional, OmissionReason::ResourceLimit);
                    continue;
                }
            };

            let entry = self.plan.push(
                node,
                PlanNode {
                    id: 0,
                    parent: None,
                    action: None,
                    conditional: Some(t.conditional.clone()),
                    transition: Some((t.from.clone(), t.to.clone())),
                    post_state: entry_state,
                    children: Vec::new(),
                },
            );
            let mut last = entry;
            for (action, state) in actions {
                last = self.plan.push(
                    last,
                    PlanNode {
                        id: 0,
                        parent: None,
                        action: Some(action),
                        conditional: None,
                        transition: None,
                        post_state: state,
                        children: Vec::new(),
                    },
                );
            }
            self.plan.checkpoint_map.insert(t.to.clone(), last);
            self.report
                .outcomes
                .insert(t.to.clone(), CheckpointOutcome::Mapped { node: last });
            self.expand(&t.to, last);
        }
    }

    fn omit(&mut self, parent: &str, anchor: NodeId, checkpoint: &str, conditional: &AtomSet, reason: OmissionReason) {
        self.plan.omitted.push(Omission {
            checkpoint: checkpoint.to_string(),
            reason,
            parent: parent.to_string(),
            anchor: Some(anchor),
            conditional: conditional.clone(),
        });
        let outcome = match reason {
            OmissionReason::ResourceLimit => CheckpointOutcome::ResourceLimit,
            _ => CheckpointOutcome::OmittedConflict,
        };
        self.report.outcomes.insert(checkpoint.to_string(), outcome);
        for descendant in self.automaton.subtree(checkpoint).into_iter().skip(1) {
            let t = self
                .automaton
                .transitions
                .iter()
                .find(|t| t.to == descendant)
                .expect("tree checkpoints have an incoming transition");
            self.plan.omitted.push(Omission {
                checkpoint: descendant.clone(),
                reason: OmissionReason::OmittedAncestor,
                parent: t.from.clone(),
                anchor: None,
                conditional: t.conditional.clone(),
            });
            self.report
                .outcomes
                .insert(descendant, CheckpointOutcome::OmittedAncestor);
        }
    }
}

/// Blocking issue codes, for callers that want to explain a BLOCKED status.
pub fn blocking_codes(report: &CompilationReport) -> Vec<IssueCode> {
    report
        .issues
        .iter()
        .filter(|i| i.is_blocking())
        .map(|i| i.code)
        .collect()
}
