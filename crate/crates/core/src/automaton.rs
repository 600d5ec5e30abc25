//! Goal automata: the user's program, a tree of goal-carrying checkpoints
//! joined by conditional transitions and rooted at an empty start checkpoint.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::atom::{AtomSet, GroundPredicate};
use crate::domain::GroundTask;

pub const ROOT_ID: &str = "c0";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub id: String,
    pub label: String,
    #[serde(default)]
    pub goals: AtomSet,
}

/// `from --conditional--> to`. An empty conditional is the else-transition.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transition {
    pub from: String,
    pub to: String,
    #[serde(default)]
    pub conditional: AtomSet,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum IssueCode {
    Underspecified,
    NotATree,
    EmptyGoals,
    RootGoals,
    UnknownAtom,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationIssue {
    pub code: IssueCode,
    pub severity: Severity,
    /// Checkpoints involved, e.g. the shared source of two sibling transitions.
    pub checkpoints: Vec<String>,
    pub message: String,
}

impl ValidationIssue {
    fn error(code: IssueCode, checkpoints: Vec<String>, message: String) -> Self {
        ValidationIssue {
            code,
            severity: Severity::Error,
            checkpoints,
            message,
        }
    }

    /// Issues that make an automaton uncompilable.
    pub fn is_blocking(&self) -> bool {
        matches!(
            self.code,
            IssueCode::Underspecified | IssueCode::NotATree | IssueCode::RootGoals | IssueCode::UnknownAtom
        )
    }
}

/// One edit of the drawing board. Edits either apply completely or not at all.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum Edit {
    AddCheckpoint {
        parent: String,
        id: String,
        #[serde(default)]
        label: Option<String>,
    },
    RemoveCheckpoint {
        id: String,
    },
    SetGoals {
        checkpoint: String,
        goals: AtomSet,
    },
    SetConditional {
        from: String,
        to: String,
        conditional: AtomSet,
    },
    SetLabel {
        checkpoint: String,
        label: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EditError {
    #[error("unknown checkpoint `{0}`")]
    UnknownCheckpoint(String),
    #[error("checkpoint id `{0}` already exists")]
    DuplicateId(String),
    #[error("the start checkpoint never has goals")]
    RootGoals,
    #[error("the start checkpoint cannot be removed")]
    RemoveRoot,
    #[error("no transition `{from}` -> `{to}`")]
    UnknownTransition { from: String, to: String },
    #[error("atoms outside the predicate universe: {}", display_atoms(.0))]
    UnknownAtoms(Vec<GroundPredicate>),
}

fn display_atoms(atoms: &[GroundPredicate]) -> String {
    atoms.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AutomatonError {
    #[error("invalid automaton document at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid automaton structure: {}", .0.iter().map(|i| i.message.as_str()).collect::<Vec<_>>().join("; "))]
    Structure(Vec<ValidationIssue>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoalAutomaton {
    pub root: String,
    pub checkpoints: Vec<Checkpoint>,
    pub transitions: Vec<Transition>,
}

impl Default for GoalAutomaton {
    fn default() -> Self {
        Self::new()
    }
}

impl GoalAutomaton {
    /// Only the empty start checkpoint.
    pub fn new() -> Self {
        GoalAutomaton {
            root: ROOT_ID.to_string(),
            checkpoints: vec![Checkpoint {
                id: ROOT_ID.to_string(),
                label: "start".to_string(),
                goals: AtomSet::new(),
            }],
            transitions: Vec::new(),
        }
    }

    /// Assembles an automaton without structural checks; see [`validate`](Self::validate).
    pub fn from_parts(root: String, checkpoints: Vec<Checkpoint>, transitions: Vec<Transition>) -> Self {
        GoalAutomaton {
            root,
            checkpoints,
            transitions,
        }
    }

    pub fn checkpoint(&self, id: &str) -> Option<&Checkpoint> {
        self.checkpoints.iter().find(|c| c.id == id)
    }

    fn checkpoint_mut(&mut self, id: &str) -> Option<&mut Checkpoint> {
        self.checkpoints.iter_mut().find(|c| c.id == id)
    }

    pub fn goals(&self, id: &str) -> Option<&AtomSet> {
        self.checkpoint(id).map(|c| &c.goals)
    }

    /// Outgoing transitions of `id`, in document order.
    pub fn outgoing<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a Transition> + 'a {
        self.transitions.iter().filter(move |t| t.from == id)
    }

    pub fn parent(&self, id: &str) -> Option<&str> {
        self.transitions.iter().find(|t| t.to == id).map(|t| t.from.as_str())
    }

    pub fn transition(&self, from: &str, to: &str) -> Option<&Transition> {
        self.transitions.iter().find(|t| t.from == from && t.to == to)
    }

    /// `id` and all its descendants, preorder.
    pub fn subtree(&self, id: &str) -> Vec<String> {
        let mut out = Vec::new();
        let mut stack = vec![id.to_string()];
        let mut seen = BTreeSet::new();
        while let Some(c) = stack.pop() {
            if !seen.insert(c.clone()) {
                continue;
            }
            let children: Vec<String> = self.outgoing(&c).map(|t| t.to.clone()).collect();
            out.push(c);
            stack.extend(children.into_iter().rev());
        }
        out
    }

    pub fn apply_edit(&mut self, edit: &Edit, universe: Option<&GroundTask>) -> Result<(), EditError> {
        let check_atoms = |atoms: &AtomSet| match universe {
            Some(task) => {
                let unknown = task.unknown_atoms(atoms);
                if unknown.is_empty() {
                    Ok(())
                } else {
                    Err(EditError::UnknownAtoms(unknown))
                }
            }
            None => Ok(()),
        };
        match edit {
            Edit::AddCheckpoint { parent, id, label } => {
                if self.checkpoint(parent).is_none() {
                    return Err(EditError::UnknownCheckpoint(parent.clone()));
                }
                if self.checkpoint(id).is_some() {
                    return Err(EditError::DuplicateId(id.clone()));
                }
                self.checkpoints.push(Checkpoint {
                    id: id.clone(),
                    label: label.clone().unwrap_or_else(|| id.clone()),
                    goals: AtomSet::new(),
                });
                self.transitions.push(Transition {
                    from: parent.clone(),
                    to: id.clone(),
                    conditional: AtomSet::new(),
                });
            }
            Edit::RemoveCheckpoint { id } => {
                if *id == self.root {
                    return Err(EditError::RemoveRoot);
                }
                if self.checkpoint(id).is_none() {
                    return Err(EditError::UnknownCheckpoint(id.clone()));
                }
                let doomed: BTreeSet<String> = self.subtree(id).into_iter().collect();
                self.checkpoints.retain(|c| !doomed.contains(&c.id));
                self.transitions
                    .retain(|t| !doomed.contains(&t.to) && !doomed.contains(&t.from));
            }
            Edit::SetGoals { checkpoint, goals } => {
                if *checkpoint == self.root {
                    return Err(EditError::RootGoals);
                }
                check_atoms(goals)?;
                self.checkpoint_mut(checkpoint)
                    .ok_or_else(|| EditError::UnknownCheckpoint(checkpoint.clone()))?
                    .goals = goals.clone();
            }
            Edit::SetConditional { from, to, conditional } => {
                check_atoms(conditional)?;
                self.transitions
                    .iter_mut()
                    .find(|t| t.from == *from && t.to == *to)
                    .ok_or_else(|| EditError::UnknownTransition {
                        from: from.clone(),
                        to: to.clone(),
                    })?
                    .conditional = conditional.clone();
            }
            Edit::SetLabel { checkpoint, label } => {
                self.checkpoint_mut(checkpoint)
                    .ok_or_else(|| EditError::UnknownCheckpoint(checkpoint.clone()))?
                    .label = label.clone();
            }
        }
        Ok(())
    }

    pub fn add_checkpoint(&mut self, parent: &str, id: &str, label: &str) -> Result<(), EditError> {
        self.apply_edit(
            &Edit::AddCheckpoint {
                parent: parent.into(),
                id: id.into(),
                label: Some(label.into()),
            },
            None,
        )
    }

    pub fn set_goals(&mut self, checkpoint: &str, goals: AtomSet) -> Result<(), EditError> {
        self.apply_edit(
            &Edit::SetGoals {
                checkpoint: checkpoint.into(),
                goals,
            },
            None,
        )
    }

    pub fn set_conditional(&mut self, from: &str, to: &str, conditional: AtomSet) -> Result<(), EditError> {
        self.apply_edit(
            &Edit::SetConditional {
                from: from.into(),
                to: to.into(),
                conditional,
            },
            None,
        )
    }

    pub fn remove_checkpoint(&mut self, id: &str) -> Result<(), EditError> {
        self.apply_edit(&Edit::RemoveCheckpoint { id: id.into() }, None)
    }

    /// Structural issues only; semantic goal conflicts surface at compile time.
    pub fn validate(&self) -> Vec<ValidationIssue> {
        let mut issues = Vec::new();
        let ids: BTreeSet<&str> = self.checkpoints.iter().map(|c| c.id.as_str()).collect();
        if ids.len() != self.checkpoints.len() {
            issues.push(ValidationIssue::error(
                IssueCode::NotATree,
                Vec::new(),
                "checkpoint ids are not unique".into(),
            ));
        }
        if !ids.contains(self.root.as_str()) {
            issues.push(ValidationIssue::error(
                IssueCode::NotATree,
                vec![self.root.clone()],
                format!("start checkpoint `{}` is missing", self.root),
            ));
        }
        if self.goals(&self.root).is_some_and(|g| !g.is_empty()) {
            issues.push(ValidationIssue::error(
                IssueCode::RootGoals,
                vec![self.root.clone()],
                "the start checkpoint must not have goals".into(),
            ));
        }

        let mut parents: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for t in &self.transitions {
            for end in [&t.from, &t.to] {
                if !ids.contains(end.as_str()) {
                    issues.push(ValidationIssue::error(
                        IssueCode::NotATree,
                        vec![end.clone()],
                        format!(
                            "transition `{}` -> `{}` references unknown checkpoint `{end}`",
                            t.from, t.to
                        ),
                    ));
                }
            }
            if t.from == t.to {
                issues.push(ValidationIssue::error(
                    IssueCode::NotATree,
                    vec![t.from.clone()],
                    format!("transition loops on `{}`", t.from),
                ));
            }
            parents.entry(t.to.as_str()).or_default().push(t.from.as_str());
        }
        for (child, ps) in &parents {
            if *child == self.root {
                issues.push(ValidationIssue::error(
                    IssueCode::NotATree,
                    vec![child.to_string()],
                    "the start checkpoint cannot have incoming transitions".into(),
                ));
            } else if ps.len() > 1 {
                issues.push(ValidationIssue::error(
                    IssueCode::NotATree,
                    vec![child.to_string()],
                    format!("checkpoint `{child}` has {} incoming transitions", ps.len()),
                ));
            }
        }
        // every checkpoint must hang off the root (this also rules out cycles)
        let reachable: BTreeSet<String> = self.subtree(&self.root).into_iter().collect();
        for c in &self.checkpoints {
            if !reachable.contains(&c.id) {
                issues.push(ValidationIssue::error(
                    IssueCode::NotATree,
                    vec![c.id.clone()],
                    format!("checkpoint `{}` is not reachable from the start checkpoint", c.id),
                ));
            }
        }

        let mut by_source: BTreeMap<&str, Vec<&Transition>> = BTreeMap::new();
        for t in &self.transitions {
            by_source.entry(t.from.as_str()).or_default().push(t);
        }
        for (source, ts) in by_source {
            for (i, a) in ts.iter().enumerate() {
                for b in &ts[i + 1..] {
                    if a.conditional == b.conditional {
                        let what = if a.conditional.is_empty() {
                            "two else-transitions".to_string()
                        } else {
                            "two transitions with the same conditional".to_string()
                        };
                        issues.push(ValidationIssue::error(
                            IssueCode::Underspecified,
                            vec![source.to_string(), a.to.clone(), b.to.clone()],
                            format!("{what} leave `{source}` (to `{}` and `{}`)", a.to, b.to),
                        ));
                    }
                }
            }
        }

        for c in &self.checkpoints {
            if c.id != self.root && c.goals.is_empty() {
                issues.push(ValidationIssue {
                    code: IssueCode::EmptyGoals,
                    severity: Severity::Warning,
                    checkpoints: vec![c.id.clone()],
                    message: format!("checkpoint `{}` has no goals", c.id),
                });
            }
        }
        issues
    }

    /// Issues for atoms that are not in the task's predicate universe.
    pub fn check_atoms(&self, task: &GroundTask) -> Vec<ValidationIssue> {
        let mut issues = Vec::new();
        for c in &self.checkpoints {
            let unknown = task.unknown_atoms(&c.goals);
            if !unknown.is_empty() {
                issues.push(ValidationIssue::error(
                    IssueCode::UnknownAtom,
                    vec![c.id.clone()],
                    format!("goals of `{}` use unknown atoms: {}", c.id, display_atoms(&unknown)),
                ));
            }
        }
        for t in &self.transitions {
            let unknown = task.unknown_atoms(&t.conditional);
            if !unknown.is_empty() {
                issues.push(ValidationIssue::error(
                    IssueCode::UnknownAtom,
                    vec![t.from.clone(), t.to.clone()],
                    format!(
                        "conditional of `{}` -> `{}` uses unknown atoms: {}",
                        t.from,
                        t.to,
                        display_atoms(&unknown)
                    ),
                ));
            }
        }
        issues
    }

    /// Canonical JSON text.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("automaton serializes");
        s.push('\n');
        s
    }
}

/// Parses an automaton file, rejecting documents that are not trees rooted at
/// an empty start checkpoint. Underspecified transitions are allowed here;
/// they block compilation instead.
pub fn parse_automaton(text: &str) -> Result<GoalAutomaton, AutomatonError> {
    let a: GoalAutomaton = serde_json::from_str(text).map_err(|e| AutomatonError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let structural: Vec<_> = a
        .validate()
        .into_iter()
        .filter(|i| matches!(i.code, IssueCode::NotATree | IssueCode::RootGoals))
        .collect();
    if structural.is_empty() {
        Ok(a)
    } else {
        Err(AutomatonError::Structure(structural))
    }
}

pub fn serialize_automaton(a: &GoalAutomaton) -> String {
    a.to_json()
}
