//! Semantically labeled worlds: entities on a 2-D grid plus initial facts.
//!
//! Positional facts are derived from the layout so a world file only needs to
//! place things:
//!
//! * `robotAt(r)` for the region whose footprint contains the robot,
//! * `personAt(p, r)` for people standing in a region,
//! * `locatedIn(x, r)` for surfaces and containers placed in a region,
//! * `at(o, s)` / `in(o, c)` for objects placed on a surface or in a container,
//! * `connected(a, b)` between regions, per the world's navigation mode.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::atom::{AtomSet, GroundPredicate};
use crate::domain::{GroundTask, ROOT_KINDS};

pub type Cell = (u32, u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Navigation {
    /// Regions connect when their footprints touch.
    Adjacency,
    /// Every region connects to every other.
    Complete,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    pub rows: u32,
    pub cols: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub id: String,
    /// One of the root kinds.
    pub kind: String,
    /// Optional domain subtype refining `kind`.
    #[serde(rename = "type", default, skip_serializing_if = "Option::is_none")]
    pub subtype: Option<String>,
    pub label: String,
    pub position: Cell,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub footprint: BTreeSet<Cell>,
}

impl Entity {
    /// Most specific type, used when grounding.
    pub fn type_name(&self) -> &str {
        self.subtype.as_deref().unwrap_or(&self.kind)
    }

    /// Cells the entity occupies; its position alone when no footprint is given.
    pub fn cells(&self) -> BTreeSet<Cell> {
        if self.footprint.is_empty() {
            BTreeSet::from([self.position])
        } else {
            self.footprint.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WorldError {
    #[error("invalid world document at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("entities[{index}]: duplicate id `{id}`")]
    DuplicateId { index: usize, id: String },
    #[error("entities[{index}] `{id}`: cell ({row},{col}) outside the {rows}x{cols} grid")]
    OutOfBounds {
        index: usize,
        id: String,
        row: u32,
        col: u32,
        rows: u32,
        cols: u32,
    },
    #[error("entities[{index}] `{id}`: unknown kind `{kind}`")]
    UnknownKind { index: usize, id: String, kind: String },
    #[error("entities[{index}] `{id}`: regions need a non-empty footprint")]
    EmptyRegion { index: usize, id: String },
    #[error("world must contain exactly one robot, found {0}")]
    RobotCount(usize),
    #[error("facts[{index}]: `{fact}` references unknown entity `{entity}`")]
    UnknownEntity { index: usize, fact: String, entity: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("derived fact `{0}` is outside the predicate universe")]
pub struct InitialStateError(pub GroundPredicate);

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WorldDoc {
    grid: Grid,
    #[serde(default = "default_navigation")]
    navigation: Navigation,
    entities: Vec<Entity>,
    #[serde(default)]
    facts: Vec<GroundPredicate>,
}

fn default_navigation() -> Navigation {
    Navigation::Adjacency
}

/// A validated world. Entities are kept sorted by id.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct World {
    grid: Grid,
    navigation: Navigation,
    entities: Vec<Entity>,
    facts: AtomSet,
}

impl World {
    pub fn new(
        grid: Grid,
        navigation: Navigation,
        entities: Vec<Entity>,
        facts: impl IntoIterator<Item = GroundPredicate>,
    ) -> Result<Self, WorldError> {
        let mut seen = BTreeSet::new();
        for (index, e) in entities.iter().enumerate() {
            if !seen.insert(e.id.as_str()) {
                return Err(WorldError::DuplicateId {
                    index,
                    id: e.id.clone(),
                });
            }
            if !ROOT_KINDS.contains(&e.kind.as_str()) {
                return Err(WorldError::UnknownKind {
                    index,
                    id: e.id.clone(),
                    kind: e.kind.clone(),
                });
            }
            if e.kind == "region" && e.footprint.is_empty() {
                return Err(WorldError::EmptyRegion {
                    index,
                    id: e.id.clone(),
                });
            }
            for &(row, col) in std::iter::once(&e.position).chain(&e.footprint) {
                if row >= grid.rows || col >= grid.cols {
                    return Err(WorldError::OutOfBounds {
                        index,
                        id: e.id.clone(),
                        row,
                        col,
                        rows: grid.rows,
                        cols: grid.cols,
                    });
                }
            }
        }
        let robots = entities.iter().filter(|e| e.kind == "robot").count();
        if robots != 1 {
            return Err(WorldError::RobotCount(robots));
        }
        let facts: Vec<GroundPredicate> = facts.into_iter().collect();
        for (index, f) in facts.iter().enumerate() {
            if let Some(missing) = f.args.iter().find(|a| !seen.contains(a.as_str())) {
                return Err(WorldError::UnknownEntity {
                    index,
                    fact: f.to_string(),
                    entity: missing.clone(),
                });
            }
        }
        let mut entities = entities;
        entities.sort_by(|a, b| a.id.cmp(&b.id));
        Ok(World {
            grid,
            navigation,
            entities,
            facts: facts.into_iter().collect(),
        })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn navigation(&self) -> Navigation {
        self.navigation
    }

    pub fn entities(&self) -> &[Entity] {
        &self.entities
    }

    pub fn entity(&self, id: &str) -> Option<&Entity> {
        self.entities
            .binary_search_by(|e| e.id.as_str().cmp(id))
            .ok()
            .map(|i| &self.entities[i])
    }

    pub fn robot(&self) -> &Entity {
        self.entities
            .iter()
            .find(|e| e.kind == "robot")
            .expect("validated: exactly one robot")
    }

    pub fn initial_facts(&self) -> &AtomSet {
        &self.facts
    }

    fn of_kind<'a>(&'a self, kind: &'a str) -> impl Iterator<Item = &'a Entity> + 'a {
        self.entities.iter().filter(move |e| e.kind == kind)
    }

    fn region_of(&self, cell: Cell) -> Option<&Entity> {
        self.of_kind("region").find(|r| r.footprint.contains(&cell))
    }

    /// Facts implied by the layout (see module docs), sorted.
    pub fn derived_facts(&self) -> AtomSet {
        let mut out = AtomSet::new();
        if let Some(r) = self.region_of(self.robot().position) {
            out.insert(GroundPredicate::new("robotAt", [r.id.as_str()]));
        }
        for p in self.of_kind("person") {
            if let Some(r) = self.region_of(p.position) {
                out.insert(GroundPredicate::new("personAt", [p.id.as_str(), r.id.as_str()]));
            }
        }
        for x in self.of_kind("surface").chain(self.of_kind("container")) {
            if let Some(r) = self.region_of(x.position) {
                out.insert(GroundPredicate::new("locatedIn", [x.id.as_str(), r.id.as_str()]));
            }
        }
        for o in self.of_kind("object") {
            if let Some(s) = self.of_kind("surface").find(|s| s.cells().contains(&o.position)) {
                out.insert(GroundPredicate::new("at", [o.id.as_str(), s.id.as_str()]));
            } else if let Some(c) = self.of_kind("container").find(|c| c.cells().contains(&o.position)) {
                out.insert(GroundPredicate::new("in", [o.id.as_str(), c.id.as_str()]));
            }
        }
        let regions: Vec<&Entity> = self.of_kind("region").collect();
        for a in &regions {
            for b in &regions {
                if a.id != b.id && (self.navigation == Navigation::Complete || touching(&a.footprint, &b.footprint)) {
                    out.insert(GroundPredicate::new("connected", [a.id.as_str(), b.id.as_str()]));
                }
            }
        }
        out
    }

    /// Canonical JSON form. Entities sorted by id, facts sorted.
    pub fn to_json(&self) -> String {
        let doc = WorldDoc {
            grid: self.grid,
            navigation: self.navigation,
            entities: self.entities.clone(),
            facts: self.facts.iter().cloned().collect(),
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("world serializes");
        s.push('\n');
        s
    }

    /// Entities grouped by root kind, for display.
    pub fn kinds(&self) -> BTreeMap<&str, Vec<&str>> {
        let mut m: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for e in &self.entities {
            m.entry(e.kind.as_str()).or_default().push(e.id.as_str());
        }
        m
    }
}

fn touching(a: &BTreeSet<Cell>, b: &BTreeSet<Cell>) -> bool {
    a.iter().any(|&(r, c)| {
        b.contains(&(r, c))
            || b.contains(&(r + 1, c))
            || b.contains(&(r, c + 1))
            || (r > 0 && b.contains(&(r - 1, c)))
            || (c > 0 && b.contains(&(r, c - 1)))
    })
}

/// Parses a world file (JSON).
pub fn parse_world(text: &str) -> Result<World, WorldError> {
    let doc: WorldDoc = serde_json::from_str(text).map_err(|e| WorldError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    World::new(doc.grid, doc.navigation, doc.entities, doc.facts)
}

/// A set of facts believed true; everything else is false.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WorldState {
    facts: AtomSet,
}

impl WorldState {
    pub fn new(facts: AtomSet) -> Self {
        WorldState { facts }
    }

    pub fn facts(&self) -> &AtomSet {
        &self.facts
    }

    pub fn into_facts(self) -> AtomSet {
        self.facts
    }

    pub fn holds(&self, p: &GroundPredicate) -> bool {
        self.facts.contains(p)
    }

    pub fn holds_all<'a>(&self, ps: impl IntoIterator<Item = &'a GroundPredicate>) -> bool {
        ps.into_iter().all(|p| self.holds(p))
    }
}

/// Seeds the planning state: the world's explicit facts plus those derived
/// from its layout.
pub fn initial_state(world: &World, task: &GroundTask) -> Result<WorldState, InitialStateError> {
    let mut facts = world.initial_facts().clone();
    facts.extend(world.derived_facts());
    if let Some(bad) = facts.iter().find(|f| !task.contains(f)) {
        return Err(InitialStateError(bad.clone()));
    }
    Ok(WorldState::new(facts))
}

pub fn holds(state: &WorldState, p: &GroundPredicate) -> bool {
    state.holds(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atom::atom;
    use crate::domain::{ground_task, parse_domain};

    const ROBOT_ONLY: &str = r#"{"grid": {"rows": 1, "cols": 1},
        "entities": [{"id": "robot", "kind": "robot", "label": "Robot", "position": [0, 0]}]}"#;

    #[test]
    fn robot_only_world() {
        let w = parse_world(ROBOT_ONLY).unwrap();
        assert_eq!(w.entities().len(), 1);
        assert!(w.initial_facts().is_empty());
        assert!(w.derived_facts().is_empty());
    }

    #[test]
    fn robot_in_single_region_gets_exactly_robot_at() {
        let w = parse_world(
            r#"{"grid": {"rows": 1, "cols": 1}, "entities": [
                {"id": "home", "kind": "region", "label": "Home", "position": [0, 0], "footprint": [[0, 0]]},
                {"id": "robot", "kind": "robot", "label": "Robot", "position": [0, 0]}]}"#,
        )
        .unwrap();
        let d =
            parse_domain("(define (domain d) (:requirements :typing) (:predicates (robotAt ?r - region)))").unwrap();
        let task = ground_task(&d, &w).unwrap();
        let s = initial_state(&w, &task).unwrap();
        assert_eq!(s.facts(), &AtomSet::from([atom("robotAt", ["home"])]));
        assert!(holds(&s, &atom("robotAt", ["home"])));
        assert!(!holds(&s, &atom("robotAt", ["cafeteria"])));
    }

    #[test]
    fn derived_fact_outside_universe_is_an_error() {
        let w = parse_world(
            r#"{"grid": {"rows": 1, "cols": 2}, "entities": [
                {"id": "home", "kind": "region", "label": "Home", "position": [0, 0], "footprint": [[0, 0]]},
                {"id": "robot", "kind": "robot", "label": "Robot", "position": [0, 0]}]}"#,
        )
        .unwrap();
        let d = parse_domain("(define (domain d) (:predicates (p)))").unwrap();
        let task = ground_task(&d, &w).unwrap();
        assert_eq!(
            initial_state(&w, &task).unwrap_err(),
            InitialStateError(atom("robotAt", ["home"]))
        );
    }

    #[test]
    fn parse_errors() {
        let dup = r#"{"grid": {"rows": 2, "cols": 2}, "entities": [
            {"id": "r", "kind": "robot", "label": "R", "position": [0, 0]},
            {"id": "r", "kind": "object", "label": "R", "position": [0, 0]}]}"#;
        assert!(matches!(
            parse_world(dup),
            Err(WorldError::DuplicateId { index: 1, .. })
        ));
        let oob = r#"{"grid": {"rows": 2, "cols": 2}, "entities": [
            {"id": "r", "kind": "robot", "label": "R", "position": [2, 0]}]}"#;
        assert!(matches!(parse_world(oob), Err(WorldError::OutOfBounds { row: 2, .. })));
        let kind = r#"{"grid": {"rows": 2, "cols": 2}, "entities": [
            {"id": "r", "kind": "robot", "label": "R", "position": [0, 0]},
            {"id": "x", "kind": "gizmo", "label": "X", "position": [0, 0]}]}"#;
        assert!(matches!(parse_world(kind), Err(WorldError::UnknownKind { .. })));
        let fact = r#"{"grid": {"rows": 2, "cols": 2}, "facts": ["at(cup,table)"], "entities": [
            {"id": "r", "kind": "robot", "label": "R", "position": [0, 0]}]}"#;
        assert!(matches!(parse_world(fact), Err(WorldError::UnknownEntity { entity, .. }) if entity == "cup"));
        let syntax = "{\"grid\": {\"rows\": 2,\n \"cols\": }";
        assert!(matches!(parse_world(syntax), Err(WorldError::Syntax { line: 2, .. })));
        let no_robot = r#"{"grid": {"rows": 2, "cols": 2}, "entities": []}"#;
        assert_eq!(parse_world(no_robot), Err(WorldError::RobotCount(0)));
    }

    #[test]
    fn adjacency_follows_touching_footprints() {
        let w = parse_world(
            r#"{"grid": {"rows": 1, "cols": 5}, "navigation": "adjacency", "entities": [
                {"id": "a", "kind": "region", "label": "A", "position": [0, 0], "footprint": [[0, 0], [0, 1]]},
                {"id": "b", "kind": "region", "label": "B", "position": [0, 2], "footprint": [[0, 2]]},
                {"id": "c", "kind": "region", "label": "C", "position": [0, 4], "footprint": [[0, 4]]},
                {"id": "robot", "kind": "robot", "label": "R", "position": [0, 0]}]}"#,
        )
        .unwrap();
        let f = w.derived_facts();
        assert!(f.contains(&atom("connected", ["a", "b"])));
        assert!(f.contains(&atom("connected", ["b", "a"])));
        assert!(!f.contains(&atom("connected", ["b", "c"])));
        assert!(f.contains(&atom("robotAt", ["a"])));
    }

    #[test]
    fn canonical_json_round_trip() {
        let w = parse_world(ROBOT_ONLY).unwrap();
        let text = w.to_json();
        assert_eq!(parse_world(&text).unwrap(), w);
        assert_eq!(parse_world(&text).unwrap().to_json(), text);
    }
}
