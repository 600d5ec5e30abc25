//! Planning domains: a typed STRIPS subset of PDDL with negative preconditions.
//!
//! [`parse_domain`] reads the textual form, [`Domain::to_pddl`] writes it back
//! out canonically, and [`ground_task`] instantiates every schema against the
//! entities of a [`World`](crate::world::World).

mod ground;
mod parser;

use std::fmt::Write as _;

pub use ground::{
    apply, ground_action_schema, ground_task, validate_sequence, ApplyError, GroundAction, GroundTask, GroundingError,
    SequenceFailure, SequenceReport,
};
pub use parser::{parse_action, parse_domain, DomainError, DomainErrorKind, Pos};

/// Kinds every domain knows about without declaring them.
pub const ROOT_KINDS: [&str; 6] = ["object", "container", "surface", "region", "person", "robot"];

/// Implicit supertype of every root kind. Usable in parameter lists and as the
/// parent of abstract, non-physical types (e.g. messages); never as an
/// entity's own kind.
pub const TOP_KIND: &str = "entity";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Requirement {
    Strips,
    Typing,
    NegativePreconditions,
}

impl Requirement {
    pub fn keyword(self) -> &'static str {
        match self {
            Requirement::Strips => ":strips",
            Requirement::Typing => ":typing",
            Requirement::NegativePreconditions => ":negative-preconditions",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Self> {
        match s {
            ":strips" => Some(Requirement::Strips),
            ":typing" => Some(Requirement::Typing),
            ":negative-preconditions" => Some(Requirement::NegativePreconditions),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypeDecl {
    pub name: String,
    /// `None` only for re-declared root kinds.
    pub parent: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypedParam {
    pub name: String,
    pub kind: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PredicateSchema {
    pub name: String,
    pub params: Vec<TypedParam>,
}

impl PredicateSchema {
    pub fn arity(&self) -> usize {
        self.params.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    /// Parameter reference, stored without the leading `?`.
    Var(String),
    Const(String),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AtomTemplate {
    pub predicate: String,
    pub terms: Vec<Term>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActionSchema {
    pub name: String,
    pub params: Vec<TypedParam>,
    pub pre_pos: Vec<AtomTemplate>,
    pub pre_neg: Vec<AtomTemplate>,
    pub add: Vec<AtomTemplate>,
    pub del: Vec<AtomTemplate>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Domain {
    pub name: String,
    pub requirements: Vec<Requirement>,
    pub types: Vec<TypeDecl>,
    pub constants: Vec<TypedParam>,
    pub predicates: Vec<PredicateSchema>,
    pub actions: Vec<ActionSchema>,
}

impl Domain {
    pub fn predicate(&self, name: &str) -> Option<&PredicateSchema> {
        self.predicates.iter().find(|p| p.name == name)
    }

    pub fn action(&self, name: &str) -> Option<&ActionSchema> {
        self.actions.iter().find(|a| a.name == name)
    }

    /// Names declared in `(:types ...)`, in declaration order.
    pub fn declared_kinds(&self) -> Vec<&str> {
        self.types.iter().map(|t| t.name.as_str()).collect()
    }

    pub fn has_kind(&self, kind: &str) -> bool {
        kind == TOP_KIND || ROOT_KINDS.contains(&kind) || self.types.iter().any(|t| t.name == kind)
    }

    pub fn parent_of(&self, kind: &str) -> Option<&str> {
        if ROOT_KINDS.contains(&kind) {
            return Some(TOP_KIND);
        }
        self.types
            .iter()
            .find(|t| t.name == kind)
            .and_then(|t| t.parent.as_deref())
    }

    /// True when `kind` equals `ancestor` or descends from it.
    pub fn is_subkind(&self, kind: &str, ancestor: &str) -> bool {
        let mut current = Some(kind);
        // the hierarchy is validated acyclic at parse time, but bound the walk anyway
        for _ in 0..=self.types.len() + ROOT_KINDS.len() + 1 {
            match current {
                Some(k) if k == ancestor => return true,
                Some(k) => current = self.parent_of(k),
                None => return false,
            }
        }
        false
    }

    /// The root kind (one of [`ROOT_KINDS`]) a kind descends from.
    pub fn root_kind<'a>(&'a self, kind: &'a str) -> Option<&'a str> {
        ROOT_KINDS.iter().copied().find(|root| self.is_subkind(kind, root))
    }

    /// Canonical PDDL text. Reparsing it yields an equal `Domain`.
    pub fn to_pddl(&self) -> String {
        let typing = self.requirements.contains(&Requirement::Typing);
        let mut out = String::new();
        let _ = writeln!(out, "(define (domain {})", self.name);
        if !self.requirements.is_empty() {
            let reqs: Vec<_> = self.requirements.iter().map(|r| r.keyword()).collect();
            let _ = writeln!(out, "  (:requirements {})", reqs.join(" "));
        }
        if !self.types.is_empty() {
            out.push_str("  (:types");
            for t in &self.types {
                match &t.parent {
                    Some(p) => {
                        let _ = write!(out, " {} - {}", t.name, p);
                    }
                    None => {
                        let _ = write!(out, " {}", t.name);
                    }
                }
            }
            out.push_str(")\n");
        }
        if !self.constants.is_empty() {
            let _ = writeln!(out, "  (:constants {})", typed_list(&self.constants, "", typing));
        }
        out.push_str("  (:predicates");
        for p in &self.predicates {
            if p.params.is_empty() {
                let _ = write!(out, "\n    ({})", p.name);
            } else {
                let _ = write!(out, "\n    ({} {})", p.name, typed_list(&p.params, "?", typing));
            }
        }
        out.push_str(")\n");
        for a in &self.actions {
            out.push_str(&action_to_pddl(a, typing));
        }
        out.push_str(")\n");
        out
    }
}

fn typed_list(params: &[TypedParam], prefix: &str, typing: bool) -> String {
    params
        .iter()
        .map(|p| match typing {
            true => format!("{prefix}{} - {}", p.name, p.kind),
            false => format!("{prefix}{}", p.name),
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn template_to_pddl(t: &AtomTemplate) -> String {
    let mut s = format!("({}", t.predicate);
    for term in &t.terms {
        match term {
            Term::Var(v) => {
                let _ = write!(s, " ?{v}");
            }
            Term::Const(c) => {
                let _ = write!(s, " {c}");
            }
        }
    }
    s.push(')');
    s
}

fn conjunction(pos: &[AtomTemplate], neg: &[AtomTemplate]) -> String {
    let mut parts: Vec<String> = pos.iter().map(template_to_pddl).collect();
    parts.extend(neg.iter().map(|t| format!("(not {})", template_to_pddl(t))));
    format!("(and {})", parts.join(" "))
}

/// PDDL text of a single `(:action ...)` block.
pub fn action_to_pddl(a: &ActionSchema, typing: bool) -> String {
    format!(
        "  (:action {}\n    :parameters ({})\n    :precondition {}\n    :effect {})\n",
        a.name,
        typed_list(&a.params, "?", typing),
        conjunction(&a.pre_pos, &a.pre_neg),
        conjunction(&a.add, &a.del)
    )
}
