//! Delete-relaxation estimates: every atom's cheapest relaxed achievement cost,
//! combined by `max` (admissible) or `+` (informative, inadmissible).

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use fixedbitset::FixedBitSet;

use crate::domain::GroundTask;

pub(crate) const INFINITE: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Combine {
    Max,
    Sum,
}

/// Precomputed relaxed problem structure for one task.
pub(crate) struct Relaxation<'t> {
    task: &'t GroundTask,
    /// For every atom, the actions having it as a positive precondition.
    consumers: Vec<Vec<usize>>,
    /// Actions without positive preconditions.
    free: Vec<usize>,
}

impl<'t> Relaxation<'t> {
    pub fn new(task: &'t GroundTask) -> Self {
        let mut consumers = vec![Vec::new(); task.atoms().len()];
        let mut free = Vec::new();
        for (i, a) in task.indexed().iter().enumerate() {
            if a.pre_pos.is_empty() {
                free.push(i);
            }
            for &p in &a.pre_pos {
                consumers[p].push(i);
            }
        }
        Relaxation { task, consumers, free }
    }

    /// Relaxed cost of every atom from `state` (negative preconditions and
    /// deletes ignored), by generalized Dijkstra.
    pub fn atom_costs(&self, state: &FixedBitSet, combine: Combine) -> Vec<u32> {
        let actions = self.task.indexed();
        let mut cost = vec![INFINITE; self.consumers.len()];
        let mut pending: Vec<usize> = actions.iter().map(|a| a.pre_pos.len()).collect();
        let mut acc = vec![0u32; actions.len()];
        let mut queue = BinaryHeap::new();
        for atom in state.ones() {
            cost[atom] = 0;
            queue.push(Reverse((0u32, atom)));
        }
        let fire = |action: usize, base: u32, cost: &mut Vec<u32>, queue: &mut BinaryHeap<Reverse<(u32, usize)>>| {
            let c = base.saturating_add(1);
            for &q in &actions[action].add {
                if c < cost[q] {
                    cost[q] = c;
                    queue.push(Reverse((c, q)));
                }
            }
        };
        for &a in &self.free {
            fire(a, 0, &mut cost, &mut queue);
        }
        while let Some(Reverse((c, atom))) = queue.pop() {
            if c > cost[atom] {
                continue;
            }
            for &a in &self.consumers[atom] {
                acc[a] = match combine {
                    Combine::Max => acc[a].max(c),
                    Combine::Sum => acc[a].saturating_add(c),
                };
                pending[a] -= 1;
                if pending[a] == 0 {
                    fire(a, acc[a], &mut cost, &mut queue);
                }
            }
        }
        cost
    }

    /// Estimate for reaching all `goals` from `state`; [`INFINITE`] when some
    /// goal is unreachable even in the relaxation.
    pub fn estimate(&self, state: &FixedBitSet, goals: &[usize], combine: Combine) -> u32 {
        if goals.iter().all(|&g| state.contains(g)) {
            return 0;
        }
        let cost = self.atom_costs(state, combine);
        let mut h = 0u32;
        for &g in goals {
            if cost[g] == INFINITE {
                return INFINITE;
            }
            h = match combine {
                Combine::Max => h.max(cost[g]),
                Combine::Sum => h.saturating_add(cost[g]),
            };
        }
        h
    }
}
