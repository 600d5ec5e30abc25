use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use super::{ActionSchema, AtomTemplate, Domain, Term};
use crate::atom::{AtomSet, GroundPredicate};
use crate::world::{World, WorldState};

/// A fully instantiated action.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct GroundAction {
    pub name: String,
    pub args: Vec<String>,
    pub pre_pos: AtomSet,
    pub pre_neg: AtomSet,
    pub add: AtomSet,
    pub del: AtomSet,
}

impl GroundAction {
    /// Builds an action and normalizes it so `add ∩ del = ∅` (deletes happen first).
    pub fn new(
        name: impl Into<String>,
        args: Vec<String>,
        pre_pos: AtomSet,
        pre_neg: AtomSet,
        add: AtomSet,
        mut del: AtomSet,
    ) -> Self {
        del.retain(|a| !add.contains(a));
        GroundAction {
            name: name.into(),
            args,
            pre_pos,
            pre_neg,
            add,
            del,
        }
    }

    /// First precondition violated in `facts`, with `true` when it is a negative one.
    pub fn violated_precondition(&self, facts: &AtomSet) -> Option<(&GroundPredicate, bool)> {
        if let Some(p) = self.pre_pos.iter().find(|p| !facts.contains(*p)) {
            return Some((p, false));
        }
        self.pre_neg.iter().find(|p| facts.contains(*p)).map(|p| (p, true))
    }

    pub fn is_applicable(&self, facts: &AtomSet) -> bool {
        self.violated_precondition(facts).is_none()
    }

    /// `(facts ∖ del) ∪ add`, without checking preconditions.
    pub fn successor(&self, facts: &AtomSet) -> AtomSet {
        let mut next: AtomSet = facts.difference(&self.del).cloned().collect();
        next.extend(self.add.iter().cloned());
        next
    }

    fn key(&self) -> (&str, &[String]) {
        (&self.name, &self.args)
    }
}

impl fmt::Display for GroundAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.name, self.args.join(","))
    }
}

/// Index-based form of a ground action, used by search.
#[derive(Clone, Debug)]
pub(crate) struct IndexedAction {
    pub pre_pos: Vec<usize>,
    pub pre_neg: Vec<usize>,
    pub add: Vec<usize>,
    pub del: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GroundingError {
    #[error("entity `{id}` has kind `{kind}`, which the domain does not declare")]
    UnknownKind { id: String, kind: String },
    #[error("entity `{0}` collides with a domain constant")]
    NameCollision(String),
    #[error("action `{action}` refers to `{atom}`, which is outside the predicate universe")]
    AtomOutsideUniverse { action: String, atom: GroundPredicate },
}

/// The grounded planning problem: every atom and action instantiable over a
/// fixed set of objects. Atoms and actions are sorted lexicographically.
#[derive(Clone, Debug, Serialize)]
pub struct GroundTask {
    atoms: Vec<GroundPredicate>,
    actions: Vec<GroundAction>,
    #[serde(skip)]
    index: HashMap<GroundPredicate, usize>,
    #[serde(skip)]
    indexed: Vec<IndexedAction>,
}

impl GroundTask {
    /// Assembles a task from explicit atoms and actions. Every atom an action
    /// mentions must be in `atoms`.
    pub fn from_parts(mut atoms: Vec<GroundPredicate>, mut actions: Vec<GroundAction>) -> Result<Self, GroundingError> {
        atoms.sort();
        atoms.dedup();
        actions.sort_by(|a, b| a.key().cmp(&b.key()));
        actions.dedup_by(|a, b| a.key() == b.key());
        let index: HashMap<_, _> = atoms.iter().cloned().enumerate().map(|(i, a)| (a, i)).collect();
        let mut indexed = Vec::with_capacity(actions.len());
        for a in &actions {
            let lookup = |set: &AtomSet| -> Result<Vec<usize>, GroundingError> {
                set.iter()
                    .map(|p| {
                        index
                            .get(p)
                            .copied()
                            .ok_or_else(|| GroundingError::AtomOutsideUniverse {
                                action: a.to_string(),
                                atom: p.clone(),
                            })
                    })
                    .collect()
            };
            indexed.push(IndexedAction {
                pre_pos: lookup(&a.pre_pos)?,
                pre_neg: lookup(&a.pre_neg)?,
                add: lookup(&a.add)?,
                del: lookup(&a.del)?,
            });
        }
        Ok(GroundTask {
            atoms,
            actions,
            index,
            indexed,
        })
    }

    pub fn atoms(&self) -> &[GroundPredicate] {
        &self.atoms
    }

    pub fn actions(&self) -> &[GroundAction] {
        &self.actions
    }

    pub fn atom_id(&self, atom: &GroundPredicate) -> Option<usize> {
        self.index.get(atom).copied()
    }

    pub fn contains(&self, atom: &GroundPredicate) -> bool {
        self.index.contains_key(atom)
    }

    pub fn find_action(&self, name: &str, args: &[String]) -> Option<&GroundAction> {
        self.actions
            .binary_search_by(|a| a.key().cmp(&(name, args)))
            .ok()
            .map(|i| &self.actions[i])
    }

    /// Looks up an action by its display form `name(a,b)`.
    pub fn action_by_label(&self, label: &str) -> Option<&GroundAction> {
        let parsed: GroundPredicate = label.parse().ok()?;
        self.find_action(&parsed.name, &parsed.args)
    }

    pub(crate) fn indexed(&self) -> &[IndexedAction] {
        &self.indexed
    }

    /// Atoms of `set` that are not part of the universe.
    pub fn unknown_atoms<'a>(&self, set: impl IntoIterator<Item = &'a GroundPredicate>) -> Vec<GroundPredicate> {
        set.into_iter().filter(|a| !self.contains(a)).cloned().collect()
    }
}

/// An object available for grounding, with its most specific type.
#[derive(Clone, Debug)]
struct Object {
    id: String,
    kind: String,
}

fn objects_of<'a>(domain: &Domain, objects: &'a [Object], kind: &str) -> Vec<&'a str> {
    objects
        .iter()
        .filter(|o| domain.is_subkind(&o.kind, kind))
        .map(|o| o.id.as_str())
        .collect()
}

/// Calls `f` for every assignment in the cartesian product, in lexicographic order.
fn for_each_assignment<'a>(choices: &[Vec<&'a str>], f: &mut impl FnMut(&[&'a str])) {
    fn go<'a>(choices: &[Vec<&'a str>], acc: &mut Vec<&'a str>, f: &mut impl FnMut(&[&'a str])) {
        match choices.split_first() {
            None => f(acc),
            Some((first, rest)) => {
                for c in first {
                    acc.push(c);
                    go(rest, acc, f);
                    acc.pop();
                }
            }
        }
    }
    go(choices, &mut Vec::with_capacity(choices.len()), f)
}

pub(crate) fn instantiate(t: &AtomTemplate, params: &[super::TypedParam], binding: &[&str]) -> GroundPredicate {
    GroundPredicate {
        name: t.predicate.clone(),
        args: t
            .terms
            .iter()
            .map(|term| match term {
                Term::Const(c) => c.clone(),
                Term::Var(v) => {
                    let i = params
                        .iter()
                        .position(|p| &p.name == v)
                        .expect("parser checked variables");
                    binding[i].to_string()
                }
            })
            .collect(),
    }
}

/// Instantiates `schema` with every type-consistent binding over `objects`.
pub(crate) fn ground_schema(
    domain: &Domain,
    schema: &ActionSchema,
    objects: &[(String, String)],
    mut keep: impl FnMut(&[&str]) -> bool,
) -> Vec<GroundAction> {
    let objs: Vec<Object> = objects
        .iter()
        .map(|(id, kind)| Object {
            id: id.clone(),
            kind: kind.clone(),
        })
        .collect();
    let choices: Vec<Vec<&str>> = schema
        .params
        .iter()
        .map(|p| objects_of(domain, &objs, &p.kind))
        .collect();
    let mut out = Vec::new();
    for_each_assignment(&choices, &mut |binding| {
        if !keep(binding) {
            return;
        }
        let set =
            |ts: &[AtomTemplate]| -> AtomSet { ts.iter().map(|t| instantiate(t, &schema.params, binding)).collect() };
        out.push(GroundAction::new(
            schema.name.clone(),
            binding.iter().map(|s| s.to_string()).collect(),
            set(&schema.pre_pos),
            set(&schema.pre_neg),
            set(&schema.add),
            set(&schema.del),
        ));
    });
    out
}

/// Objects available for grounding: world entities plus domain constants,
/// sorted by identifier, each paired with its most specific type.
pub(crate) fn grounding_objects(domain: &Domain, world: &World) -> Result<Vec<(String, String)>, GroundingError> {
    let mut objects = BTreeMap::new();
    for c in &domain.constants {
        objects.insert(c.name.clone(), c.kind.clone());
    }
    for e in world.entities() {
        let kind = e.type_name();
        if !domain.has_kind(kind) || domain.root_kind(kind) != Some(e.kind.as_str()) {
            return Err(GroundingError::UnknownKind {
                id: e.id.clone(),
                kind: kind.to_string(),
            });
        }
        if objects.insert(e.id.clone(), kind.to_string()).is_some() {
            return Err(GroundingError::NameCollision(e.id.clone()));
        }
    }
    Ok(objects.into_iter().collect())
}

/// Grounds one action schema (e.g. a human action from a scenario) over the
/// world's entities, keeping only the argument bindings `keep` accepts.
pub fn ground_action_schema(
    domain: &Domain,
    world: &World,
    schema: &ActionSchema,
    keep: impl FnMut(&[&str]) -> bool,
) -> Result<Vec<GroundAction>, GroundingError> {
    let objects = grounding_objects(domain, world)?;
    Ok(ground_schema(domain, schema, &objects, keep))
}

/// Grounds every predicate and action schema of `domain` over the entities of
/// `world` (plus the domain's constants).
pub fn ground_task(domain: &Domain, world: &World) -> Result<GroundTask, GroundingError> {
    let objects = grounding_objects(domain, world)?;
    let objs: Vec<Object> = objects
        .iter()
        .map(|(id, kind)| Object {
            id: id.clone(),
            kind: kind.clone(),
        })
        .collect();
    let mut atoms = Vec::new();
    for schema in &domain.predicates {
        let choices: Vec<Vec<&str>> = schema
            .params
            .iter()
            .map(|p| objects_of(domain, &objs, &p.kind))
            .collect();
        for_each_assignment(&choices, &mut |binding| {
            atoms.push(GroundPredicate::new(schema.name.clone(), binding.iter().copied()));
        });
    }
    let mut actions = Vec::new();
    for schema in &domain.actions {
        actions.extend(ground_schema(domain, schema, &objects, |_| true));
    }
    GroundTask::from_parts(atoms, actions)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{action} is not applicable: precondition {}{atom} violated", if *.negated { "not " } else { "" })]
pub struct ApplyError {
    pub action: String,
    pub atom: GroundPredicate,
    pub negated: bool,
}

/// STRIPS successor: `(state ∖ del) ∪ add`, after checking preconditions.
pub fn apply(state: &WorldState, action: &GroundAction) -> Result<WorldState, ApplyError> {
    if let Some((atom, negated)) = action.violated_precondition(state.facts()) {
        return Err(ApplyError {
            action: action.to_string(),
            atom: atom.clone(),
            negated,
        });
    }
    Ok(WorldState::new(action.successor(state.facts())))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SequenceFailure {
    Precondition {
        index: usize,
        action: String,
        atom: GroundPredicate,
        negated: bool,
    },
    GoalsUnmet {
        missing: Vec<GroundPredicate>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SequenceReport {
    pub valid: bool,
    pub failure: Option<SequenceFailure>,
    pub final_state: Option<WorldState>,
}

/// Checks that `actions` apply in order from `init` and end in a state that
/// contains `goals`.
pub fn validate_sequence(init: &WorldState, actions: &[GroundAction], goals: &AtomSet) -> SequenceReport {
    let mut state = init.clone();
    for (index, action) in actions.iter().enumerate() {
        match apply(&state, action) {
            Ok(next) => state = next,
            Err(e) => {
                return SequenceReport {
                    valid: false,
                    failure: Some(SequenceFailure::Precondition {
                        index,
                        action: e.action,
                        atom: e.atom,
                        negated: e.negated,
                    }),
                    final_state: None,
                }
            }
        }
    }
    let missing: Vec<_> = goals.iter().filter(|g| !state.holds(g)).cloned().collect();
    SequenceReport {
        valid: missing.is_empty(),
        failure: (!missing.is_empty()).then_some(SequenceFailure::GoalsUnmet { missing }),
        final_state: Some(state),
    }
}
