//! Drivers that run execution sessions along chosen or random paths.

#![allow(dead_code)]

use std::sync::Arc;

use goalplan_core::compiler::{BranchingPlan, NodeId};
use goalplan_core::domain::{GroundAction, GroundTask};
use goalplan_core::executor::{start_session, ExecutionSession, ExecutionTrace, SessionStatus};
use goalplan_core::AtomSet;
use rand::seq::SliceRandom;
use rand::Rng;

/// Every leaf of the plan tree.
pub fn leaves(plan: &BranchingPlan) -> Vec<NodeId> {
    plan.nodes()
        .iter()
        .filter(|n| n.children.is_empty())
        .map(|n| n.id)
        .collect()
}

/// Runs the plan without deviations, confirming at every wait the
/// conditional that leads towards `leaf`.
pub fn drive_to_leaf(plan: Arc<BranchingPlan>, task: Arc<GroundTask>, leaf: NodeId) -> ExecutionSession {
    let mut session = start_session(plan.clone(), task).unwrap();
    loop {
        session.run_until_blocked();
        if session.status() != SessionStatus::Waiting {
            return session;
        }
        let here = session.cursor();
        let (conditional, _) = plan
            .branch_options(here)
            .into_iter()
            .find(|(_, child)| child.is_some_and(|c| c == leaf || plan.is_descendant(leaf, c)))
            .expect("the leaf lies below the wait");
        session.assert_conditional(&conditional).unwrap();
    }
}

fn enabled(session: &ExecutionSession) -> Vec<AtomSet> {
    let facts = session.perceived().facts();
    let labels = session.pending_conditionals();
    let mut out: Vec<AtomSet> = labels
        .iter()
        .filter(|p| !p.is_empty() && p.is_subset(facts))
        .cloned()
        .collect();
    if out.is_empty() && labels.iter().any(|p| p.is_empty()) {
        out.push(AtomSet::new());
    }
    out
}

/// A random run in which people only ever do what `human` allows, at most
/// `max_interventions` times, and conditionals are confirmed only once they
/// hold. Ends when the robot cannot move (finished, halted, or waiting on a
/// conditional nobody will bring about).
pub fn random_trace(
    plan: Arc<BranchingPlan>,
    task: Arc<GroundTask>,
    human: &[GroundAction],
    max_interventions: usize,
    rng: &mut impl Rng,
) -> ExecutionTrace {
    let mut session = start_session(plan, task).unwrap();
    let mut left = max_interventions;
    loop {
        let options = enabled(&session);
        let robot_can_move = session.status() == SessionStatus::Running || !options.is_empty();
        let candidates: Vec<&GroundAction> = human
            .iter()
            .filter(|a| a.is_applicable(session.perceived().facts()))
            .filter(|a| a.successor(session.perceived().facts()) != *session.perceived().facts())
            .collect();
        let human_acts = left > 0 && !candidates.is_empty() && !session.status().is_terminal() && rng.gen_bool(0.3);
        if human_acts {
            let a = candidates.choose(rng).unwrap();
            session.inject_deviation(&a.add, &a.del).unwrap();
            left -= 1;
        } else if !robot_can_move {
            return session.trace();
        } else if session.status() == SessionStatus::Running {
            session.step().unwrap();
        } else {
            let choice = options.choose(rng).unwrap().clone();
            session.assert_conditional(&choice).unwrap();
        }
    }
}
