//! Compiles goal automata into branching task plans, simulates their
//! execution with replanning, and scores the results.

pub mod atom;
pub mod automaton;
pub mod compiler;
pub mod domain;
pub mod executor;
pub mod metrics;
pub mod planner;
pub mod world;

pub use atom::{atom, parse_atoms, AtomSet, GroundPredicate};
