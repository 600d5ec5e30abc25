//! Forward state-space planner over a [`GroundTask`].
//!
//! The default mode is A* with the admissible max-relaxation heuristic and unit
//! action costs, so solved plans are shortest. The greedy mode uses the additive
//! relaxation instead and gives no optimality guarantee; it is meant for quick
//! local repairs. Both modes are deterministic.

mod heuristic;
mod search;

use std::time::Duration;

use fixedbitset::FixedBitSet;
use serde::Serialize;

use crate::atom::AtomSet;
use crate::domain::{GroundAction, GroundTask};
use crate::world::WorldState;

pub use search::{find_plan, find_plan_for};

/// Default node-expansion budget.
pub const DEFAULT_MAX_EXPANSIONS: u64 = 1_000_000;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// A* with the max heuristic: shortest plans.
    #[default]
    Optimal,
    /// Greedy best-first with the additive heuristic: fast, not necessarily shortest.
    Greedy,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Limits {
    pub max_expansions: u64,
    /// Wall-clock cap. Leave `None` when results must be reproducible.
    pub max_time: Option<Duration>,
    pub mode: Mode,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_expansions: DEFAULT_MAX_EXPANSIONS,
            max_time: None,
            mode: Mode::Optimal,
        }
    }
}

impl Limits {
    pub fn with_expansions(max_expansions: u64) -> Self {
        Limits {
            max_expansions,
            ..Limits::default()
        }
    }

    pub fn greedy(max_expansions: u64) -> Self {
        Limits {
            max_expansions,
            mode: Mode::Greedy,
            ..Limits::default()
        }
    }
}

/// What the planner must make true (`holds`) and false (`absent`).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Goal {
    pub holds: AtomSet,
    pub absent: AtomSet,
}

impl Goal {
    pub fn new(holds: AtomSet) -> Self {
        Goal {
            holds,
            absent: AtomSet::new(),
        }
    }

    pub fn is_met(&self, facts: &AtomSet) -> bool {
        self.holds.is_subset(facts) && self.absent.is_disjoint(facts)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Plan {
    pub actions: Vec<GroundAction>,
    /// State after each action; same length as `actions`.
    pub states: Vec<WorldState>,
    /// False when found in greedy mode.
    pub optimal: bool,
    pub expanded: u64,
}

impl Plan {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "outcome", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PlanResult {
    Solved(Plan),
    /// The whole reachable state space was exhausted without meeting the goals.
    Unsolvable,
    /// The budget ran out first; says nothing about solvability.
    ResourceLimit {
        expanded: u64,
    },
}

impl PlanResult {
    pub fn plan(&self) -> Option<&Plan> {
        match self {
            PlanResult::Solved(p) => Some(p),
            _ => None,
        }
    }

    pub fn outcome(&self) -> &'static str {
        match self {
            PlanResult::Solved(_) => "SOLVED",
            PlanResult::Unsolvable => "UNSOLVABLE",
            PlanResult::ResourceLimit { .. } => "RESOURCE_LIMIT",
        }
    }
}

pub(crate) fn to_bits(task: &GroundTask, facts: &AtomSet) -> FixedBitSet {
    let mut bits = FixedBitSet::with_capacity(task.atoms().len());
    for f in facts {
        if let Some(i) = task.atom_id(f) {
            bits.insert(i);
        }
    }
    bits
}

/// Every atom true in some state reachable under the delete relaxation, which
/// over-approximates the atoms of all truly reachable states.
pub fn reachable_atoms(task: &GroundTask, init: &WorldState) -> AtomSet {
    let relax = heuristic::Relaxation::new(task);
    let cost = relax.atom_costs(&to_bits(task, init.facts()), heuristic::Combine::Max);
    let mut out = init.facts().clone();
    out.extend(
        cost.iter()
            .enumerate()
            .filter(|(_, c)| **c != heuristic::INFINITE)
            .map(|(i, _)| task.atoms()[i].clone()),
    );
    out
}
