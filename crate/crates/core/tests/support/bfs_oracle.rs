//! Brute-force reference planner over bitmask states, independent of the
//! engine's search code. Also generates the random instances it is checked on.

#![allow(dead_code)]

use std::collections::{HashMap, VecDeque};

use goalplan_core::domain::{GroundAction, GroundTask};
use goalplan_core::{AtomSet, GroundPredicate};
use rand::Rng;

/// One action with every atom set encoded as a bitmask.
#[derive(Clone, Debug)]
pub struct MaskAction {
    pub pre: u32,
    pub neg: u32,
    pub add: u32,
    pub del: u32,
}

#[derive(Clone, Debug)]
pub struct Instance {
    pub atoms: usize,
    pub actions: Vec<MaskAction>,
    pub init: u32,
    pub goal: u32,
}

pub fn atom_name(i: usize) -> GroundPredicate {
    GroundPredicate::new(format!("p{i:02}"), Vec::<String>::new())
}

fn mask_to_set(mask: u32, atoms: usize) -> AtomSet {
    (0..atoms).filter(|i| mask & (1 << i) != 0).map(atom_name).collect()
}

impl Instance {
    pub fn random(rng: &mut impl Rng) -> Instance {
        let atoms = rng.gen_range(3..=12);
        let n_actions = rng.gen_range(1..=14);
        let pick = |rng: &mut dyn rand::RngCore, p: f64| -> u32 {
            (0..atoms).filter(|_| rng.gen_bool(p)).fold(0, |m, i| m | (1 << i))
        };
        let actions = (0..n_actions)
            .map(|_| {
                let pre = pick(rng, 0.2);
                let neg = pick(rng, 0.1) & !pre;
                let add = pick(rng, 0.25);
                let del = pick(rng, 0.2);
                MaskAction { pre, neg, add, del }
            })
            .collect();
        Instance {
            atoms,
            actions,
            init: pick(rng, 0.3),
            goal: pick(rng, 0.3),
        }
    }

    fn applicable(a: &MaskAction, s: u32) -> bool {
        s & a.pre == a.pre && s & a.neg == 0
    }

    fn apply(a: &MaskAction, s: u32) -> u32 {
        (s & !a.del) | a.add
    }

    /// Shortest plan length, `None` if unsolvable; also the number of reachable states.
    pub fn bfs(&self) -> (Option<usize>, usize) {
        let mut dist: HashMap<u32, usize> = HashMap::from([(self.init, 0)]);
        let mut queue = VecDeque::from([self.init]);
        let mut found = None;
        while let Some(s) = queue.pop_front() {
            let d = dist[&s];
            if found.is_none() && s & self.goal == self.goal {
                found = Some(d);
            }
            for a in &self.actions {
                if Self::applicable(a, s) {
                    let t = Self::apply(a, s);
                    if let std::collections::hash_map::Entry::Vacant(e) = dist.entry(t) {
                        e.insert(d + 1);
                        queue.push_back(t);
                    }
                }
            }
        }
        (found, dist.len())
    }

    pub fn task(&self) -> GroundTask {
        let actions = self
            .actions
            .iter()
            .enumerate()
            .map(|(i, a)| {
                GroundAction::new(
                    format!("a{i:02}"),
                    vec![],
                    mask_to_set(a.pre, self.atoms),
                    mask_to_set(a.neg, self.atoms),
                    mask_to_set(a.add, self.atoms),
                    mask_to_set(a.del, self.atoms),
                )
            })
            .collect();
        GroundTask::from_parts((0..self.atoms).map(atom_name).collect(), actions).expect("closed instance")
    }

    pub fn init_set(&self) -> AtomSet {
        mask_to_set(self.init, self.atoms)
    }

    pub fn goal_set(&self) -> AtomSet {
        mask_to_set(self.goal, self.atoms)
    }
}
