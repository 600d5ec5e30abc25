//! Independent checks of the compiled-plan invariants, plus a generator of
//! random automata over a random small domain.

#![allow(dead_code)]

use std::collections::BTreeSet;

use goalplan_core::automaton::{GoalAutomaton, Transition, ROOT_ID};
use goalplan_core::compiler::{
    compile_task, BranchingPlan, CheckpointOutcome, CompilationReport, CompileOptions, PlanStatus,
};
use goalplan_core::domain::{validate_sequence, GroundTask};
use goalplan_core::world::WorldState;
use goalplan_core::AtomSet;
use rand::Rng;

use super::bfs_oracle::{atom_name, Instance};

/// Every violated invariant of a compilation, as readable messages.
pub fn violations(
    task: &GroundTask,
    init: &WorldState,
    automaton: &GoalAutomaton,
    plan: &BranchingPlan,
    report: &CompilationReport,
) -> Vec<String> {
    let mut out = Vec::new();
    let map = plan.checkpoint_map();

    let targets: BTreeSet<_> = map.values().collect();
    if targets.len() != map.len() {
        out.push("checkpoint map is not injective".to_string());
    }
    let has_actions = plan.nodes().iter().any(|n| n.action.is_some());
    if has_actions && plan.nodes().len() <= map.len() {
        out.push("checkpoint map is surjective despite non-empty segments".to_string());
    }

    if report.status != PlanStatus::Blocked {
        for c in &automaton.checkpoints {
            let mapped = map.contains_key(&c.id);
            let omitted = plan.omitted().iter().any(|o| o.checkpoint == c.id);
            if mapped == omitted {
                out.push(format!("checkpoint {} mapped={mapped} omitted={omitted}", c.id));
            }
            match (report.outcomes.get(&c.id), map.get(&c.id)) {
                (Some(CheckpointOutcome::Mapped { node }), Some(n)) if node == n => {}
                (Some(CheckpointOutcome::Mapped { .. }), _) | (None, _) => {
                    out.push(format!("report outcome for {} disagrees with the map", c.id))
                }
                _ => {}
            }
        }
    }

    for (c, &n) in map {
        let goals = automaton.goals(c).expect("mapped checkpoints exist");
        if !goals.is_subset(plan.state_after(n).unwrap().facts()) {
            out.push(format!("goals of {c} not met at node {n}"));
        }
    }

    for t in &automaton.transitions {
        let (Some(&from), Some(&to)) = (map.get(&t.from), map.get(&t.to)) else {
            continue;
        };
        let entry = plan
            .node(from)
            .unwrap()
            .children
            .iter()
            .copied()
            .find(|&e| plan.node(e).unwrap().transition.as_ref() == Some(&(t.from.clone(), t.to.clone())));
        match entry {
            Some(e) if plan.is_descendant(to, e) => {
                if plan.node(e).unwrap().conditional.as_ref() != Some(&t.conditional) {
                    out.push(format!(
                        "entry for {} -> {} carries the wrong conditional",
                        t.from, t.to
                    ));
                }
            }
            _ => out.push(format!(
                "transition {} -> {} has no corresponding plan branch",
                t.from, t.to
            )),
        }
    }

    // post-states: root is the initial state, entries assert their
    // conditional, actions apply; segments are valid action sequences
    if plan.root().post_state != *init {
        out.push("root state differs from the initial state".to_string());
    }
    for node in plan.nodes().iter().skip(1) {
        let parent = plan.state_after(node.parent.unwrap()).unwrap().facts();
        let expected: AtomSet = match (&node.action, &node.conditional) {
            (Some(a), None) => a.successor(parent),
            (None, Some(p)) => parent.union(p).cloned().collect(),
            _ => {
                out.push(format!("node {} is neither an action nor an entry", node.id));
                continue;
            }
        };
        if node.post_state.facts() != &expected {
            out.push(format!(
                "post-state of node {} is not its parent's state transformed",
                node.id
            ));
        }
        if node.conditional.is_some() {
            let actions: Vec<_> = plan
                .segment(node.id)
                .iter()
                .map(|n| n.action.clone().unwrap())
                .collect();
            if !validate_sequence(&node.post_state, &actions, &AtomSet::new()).valid {
                out.push(format!("segment below entry {} is not executable", node.id));
            }
        }
    }

    let (again, again_report) = compile_task(task, init, automaton, CompileOptions::default());
    if again.to_json() != plan.to_json() || again_report != *report {
        out.push("recompilation is not byte-identical".to_string());
    }
    out
}

/// A random tree automaton over the atoms of `inst`, with distinct sibling
/// conditionals (so it never blocks).
pub fn random_automaton(inst: &Instance, rng: &mut impl Rng) -> GoalAutomaton {
    let size = rng.gen_range(1..=6);
    let mut a = GoalAutomaton::new();
    let random_set = |rng: &mut dyn rand::RngCore, max: usize| -> AtomSet {
        let n = rng.gen_range(0..=max);
        (0..n).map(|_| atom_name(rng.gen_range(0..inst.atoms))).collect()
    };
    for i in 1..=size {
        let id = format!("k{i}");
        let parent = a.checkpoints[rng.gen_range(0..a.checkpoints.len())].id.clone();
        let goals = loop {
            let g = random_set(rng, 2);
            if !g.is_empty() || rng.gen_bool(0.1) {
                break g;
            }
        };
        let siblings: Vec<AtomSet> = a
            .outgoing(&parent)
            .map(|t: &Transition| t.conditional.clone())
            .collect();
        let conditional = loop {
            let c = random_set(rng, 2);
            if !siblings.contains(&c) {
                break c;
            }
        };
        a.add_checkpoint(&parent, &id, &id).unwrap();
        a.set_goals(&id, goals).unwrap();
        a.set_conditional(&parent, &id, conditional).unwrap();
    }
    debug_assert!(a.checkpoint(ROOT_ID).is_some());
    a
}
