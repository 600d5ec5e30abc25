//! Brute-force human-effort oracle for the tidying fixture. It drives an
//! execution session through its public API and tries every interleaving of
//! robot steps with hand-written human interventions, by iterative deepening
//! on the number of interventions.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashSet};
use std::sync::Arc;

use goalplan_core::atom;
use goalplan_core::compiler::BranchingPlan;
use goalplan_core::domain::GroundTask;
use goalplan_core::executor::{start_session, ExecutionSession, SessionStatus};
use goalplan_core::AtomSet;

const SURFACES: [&str; 3] = ["dining-table", "countertop", "drying-rack"];
const DISHES: [&str; 2] = ["cup", "plate"];

/// (add, remove) for every intervention a person could make in `facts`,
/// anywhere in the house.
pub fn interventions(facts: &AtomSet) -> Vec<(AtomSet, AtomSet)> {
    let mut out = Vec::new();
    for o in DISHES {
        for from in SURFACES {
            let on = atom("at", [o, from]);
            if !facts.contains(&on) {
                continue;
            }
            // wash: onto the rack, clean
            out.push((
                AtomSet::from([atom("at", [o, "drying-rack"]), atom("clean", [o])]),
                if from == "drying-rack" {
                    AtomSet::new()
                } else {
                    AtomSet::from([on.clone()])
                },
            ));
            for to in SURFACES.iter().filter(|t| **t != from) {
                out.push((AtomSet::from([atom("at", [o, to])]), AtomSet::from([on.clone()])));
            }
            if facts.contains(&atom("open", ["cupboard"])) {
                out.push((
                    AtomSet::from([atom("in", [o, "cupboard"])]),
                    AtomSet::from([on.clone()]),
                ));
            }
        }
    }
    if facts.contains(&atom("closed", ["cupboard"])) {
        out.push((
            AtomSet::from([atom("open", ["cupboard"])]),
            AtomSet::from([atom("closed", ["cupboard"])]),
        ));
    }
    out.retain(|(add, remove)| {
        let mut next: AtomSet = facts.difference(remove).cloned().collect();
        next.extend(add.iter().cloned());
        next != *facts
    });
    out
}

fn apply(facts: &AtomSet, (add, remove): &(AtomSet, AtomSet)) -> AtomSet {
    let mut next: AtomSet = facts.difference(remove).cloned().collect();
    next.extend(add.iter().cloned());
    next
}

fn all_met(objectives: &[AtomSet], facts: &AtomSet) -> bool {
    objectives.iter().all(|o| o.is_subset(facts))
}

/// Robot continuations, choosing among conditionals that actually hold (or
/// the else-branch when none does).
fn robot_moves(s: &ExecutionSession) -> Vec<ExecutionSession> {
    match s.status() {
        SessionStatus::Running => {
            let mut n = s.clone();
            n.step().unwrap();
            vec![n]
        }
        SessionStatus::Waiting => {
            let facts = s.perceived().facts().clone();
            let labels = s.pending_conditionals();
            let mut enabled: Vec<AtomSet> = labels
                .iter()
                .filter(|p| !p.is_empty() && p.is_subset(&facts))
                .cloned()
                .collect();
            if enabled.is_empty() && labels.iter().any(|p| p.is_empty()) {
                enabled.push(AtomSet::new());
            }
            enabled
                .iter()
                .map(|p| {
                    let mut n = s.clone();
                    n.assert_conditional(p).unwrap();
                    n
                })
                .collect()
        }
        _ => Vec::new(),
    }
}

/// After the robot has stopped for good, people act alone.
fn people_alone(facts: &AtomSet, objectives: &[AtomSet], budget: u32) -> bool {
    if all_met(objectives, facts) {
        return true;
    }
    budget > 0
        && interventions(facts)
            .iter()
            .any(|i| people_alone(&apply(facts, i), objectives, budget - 1))
}

struct Search<'a> {
    objectives: &'a [AtomSet],
    failed: HashSet<(AtomSet, usize, String, u32)>,
}

impl Search<'_> {
    fn reachable(&mut self, s: &ExecutionSession, budget: u32) -> bool {
        let key = (
            s.perceived().facts().clone(),
            s.cursor(),
            format!("{:?}", s.status()),
            budget,
        );
        if self.failed.contains(&key) {
            return false;
        }
        let found = self.explore(s, budget);
        if !found {
            self.failed.insert(key);
        }
        found
    }

    fn explore(&mut self, s: &ExecutionSession, budget: u32) -> bool {
        let robot = robot_moves(s);
        if robot.is_empty() && all_met(self.objectives, s.perceived().facts()) {
            return true;
        }
        if s.status().is_terminal() {
            return people_alone(s.perceived().facts(), self.objectives, budget);
        }
        for next in robot {
            if self.reachable(&next, budget) {
                return true;
            }
        }
        if budget == 0 {
            return false;
        }
        for (add, remove) in interventions(s.perceived().facts()) {
            let mut next = s.clone();
            next.inject_deviation(&add, &remove).unwrap();
            if self.reachable(&next, budget - 1) {
                return true;
            }
        }
        false
    }
}

/// Fewest interventions after which execution rests with all objectives met.
pub fn min_interventions(
    plan: Arc<BranchingPlan>,
    task: Arc<GroundTask>,
    objectives: &[AtomSet],
    max: u32,
) -> Option<u32> {
    let start = start_session(plan, task).unwrap();
    (0..=max).find(|&budget| {
        Search {
            objectives,
            failed: HashSet::new(),
        }
        .reachable(&start, budget)
    })
}

pub fn objectives() -> Vec<AtomSet> {
    vec![
        BTreeSet::from([atom("clean", ["cup"])]),
        BTreeSet::from([atom("clean", ["plate"])]),
        BTreeSet::from([atom("clean", ["cup"]), atom("in", ["cup", "cupboard"])]),
        BTreeSet::from([atom("clean", ["plate"]), atom("in", ["plate", "cupboard"])]),
    ]
}
