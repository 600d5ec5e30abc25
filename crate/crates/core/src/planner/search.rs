use std::cmp::Reverse;
use std::collections::hash_map::Entry;
use std::collections::{BinaryHeap, HashMap};
use std::time::Instant;

use fixedbitset::FixedBitSet;

use super::heuristic::{Combine, Relaxation, INFINITE};
use super::{to_bits, Goal, Limits, Mode, Plan, PlanResult};
use crate::atom::AtomSet;
use crate::domain::GroundTask;
use crate::world::WorldState;

/// Shortest (or, in greedy mode, some) plan from `init` to a state containing
/// all of `goals`.
pub fn find_plan(task: &GroundTask, init: &WorldState, goals: &AtomSet, limits: Limits) -> PlanResult {
    find_plan_for(task, init, &Goal::new(goals.clone()), limits)
}

struct Node {
    state: FixedBitSet,
    parent: Option<(usize, usize)>,
    g: u32,
}

/// Like [`find_plan`], but the goal may also require atoms to be false.
pub fn find_plan_for(task: &GroundTask, init: &WorldState, goal: &Goal, limits: Limits) -> PlanResult {
    // Atoms outside the universe never change: they either hold forever or never.
    let mut holds = Vec::new();
    for g in &goal.holds {
        match task.atom_id(g) {
            Some(i) => holds.push(i),
            None if init.holds(g) => {}
            None => return PlanResult::Unsolvable,
        }
    }
    let mut absent = Vec::new();
    for g in &goal.absent {
        match task.atom_id(g) {
            Some(i) => absent.push(i),
            None if init.holds(g) => return PlanResult::Unsolvable,
            None => {}
        }
    }

    let actions = task.indexed();
    let relax = Relaxation::new(task);
    let combine = match limits.mode {
        Mode::Optimal => Combine::Max,
        Mode::Greedy => Combine::Sum,
    };
    let is_goal = |s: &FixedBitSet| holds.iter().all(|&i| s.contains(i)) && !absent.iter().any(|&i| s.contains(i));

    let start = to_bits(task, init.facts());
    let h0 = relax.estimate(&start, &holds, combine);
    if h0 == INFINITE {
        return PlanResult::Unsolvable;
    }

    let mut nodes = vec![Node {
        state: start.clone(),
        parent: None,
        g: 0,
    }];
    let mut index: HashMap<FixedBitSet, usize> = HashMap::from([(start, 0)]);
    // (primary, h, insertion order): successors are generated in sorted action
    // order, so equal keys resolve towards lexicographically smaller actions
    let mut open = BinaryHeap::new();
    let mut seq = 0u64;
    let key = |g: u32, h: u32| match limits.mode {
        Mode::Optimal => g + h,
        Mode::Greedy => h,
    };
    open.push(Reverse((key(0, h0), h0, seq, 0u32, 0usize)));

    let started = Instant::now();
    let mut expanded = 0u64;
    while let Some(Reverse((_, _, _, g, id))) = open.pop() {
        if g > nodes[id].g {
            continue; // superseded by a cheaper path
        }
        if is_goal(&nodes[id].state) {
            return PlanResult::Solved(reconstruct(task, init, &nodes, id, limits.mode, expanded));
        }
        if expanded >= limits.max_expansions
            || (expanded.is_multiple_of(1024) && limits.max_time.is_some_and(|t| started.elapsed() >= t))
        {
            return PlanResult::ResourceLimit { expanded };
        }
        expanded += 1;

        for (ai, a) in actions.iter().enumerate() {
            let state = &nodes[id].state;
            if !a.pre_pos.iter().all(|&p| state.contains(p)) || a.pre_neg.iter().any(|&p| state.contains(p)) {
                continue;
            }
            let mut next = state.clone();
            for &d in &a.del {
                next.set(d, false);
            }
            for &q in &a.add {
                next.insert(q);
            }
            let g2 = g + 1;
            let target = match index.entry(next) {
                Entry::Occupied(e) => {
                    let n = *e.get();
                    if limits.mode == Mode::Greedy || nodes[n].g <= g2 {
                        continue;
                    }
                    nodes[n].g = g2;
                    nodes[n].parent = Some((id, ai));
                    n
                }
                Entry::Vacant(e) => {
                    let n = nodes.len();
                    nodes.push(Node {
                        state: e.key().clone(),
                        parent: Some((id, ai)),
                        g: g2,
                    });
                    e.insert(n);
                    n
                }
            };
            let h = relax.estimate(&nodes[target].state, &holds, combine);
            if h == INFINITE {
                continue;
            }
            seq += 1;
            open.push(Reverse((key(g2, h), h, seq, g2, target)));
        }
    }
    PlanResult::Unsolvable
}

fn reconstruct(task: &GroundTask, init: &WorldState, nodes: &[Node], goal: usize, mode: Mode, expanded: u64) -> Plan {
    let mut steps = Vec::new();
    let mut cur = goal;
    while let Some((parent, action)) = nodes[cur].parent {
        steps.push(action);
        cur = parent;
    }
    steps.reverse();
    let mut facts = init.facts().clone();
    let mut actions = Vec::with_capacity(steps.len());
    let mut states = Vec::with_capacity(steps.len());
    for ai in steps {
        let a = &task.actions()[ai];
        facts = a.successor(&facts);
        actions.push(a.clone());
        states.push(WorldState::new(facts.clone()));
    }
    Plan {
        actions,
        states,
        optimal: mode == Mode::Optimal,
        expanded,
    }
}
