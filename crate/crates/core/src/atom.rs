//! Ground atoms and their canonical text form `name(arg1,...,argk)`.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// A predicate applied to concrete entity identifiers.
///
/// Ordering is lexicographic by predicate name, then by arguments, which is
/// the ordering used for every set of atoms that leaves this crate.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroundPredicate {
    pub name: String,
    pub args: Vec<String>,
}

pub type AtomSet = BTreeSet<GroundPredicate>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed atom `{text}`: {reason}")]
pub struct AtomSyntaxError {
    pub text: String,
    pub reason: &'static str,
}

impl GroundPredicate {
    pub fn new<N, I, S>(name: N, args: I) -> Self
    where
        N: Into<String>,
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        GroundPredicate {
            name: name.into(),
            args: args.into_iter().map(Into::into).collect(),
        }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }
}

/// Shorthand used heavily in tests and fixtures: `atom("at", ["cup", "table"])`.
pub fn atom<const N: usize>(name: &str, args: [&str; N]) -> GroundPredicate {
    GroundPredicate::new(name, args)
}

/// Parses a list of atoms in canonical text form into a set.
pub fn parse_atoms<I, S>(items: I) -> Result<AtomSet, AtomSyntaxError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    items.into_iter().map(|s| s.as_ref().parse()).collect()
}

/// Comma-separated canonical forms, in set order.
pub fn display_set<'a>(atoms: impl IntoIterator<Item = &'a GroundPredicate>) -> String {
    atoms
        .into_iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(", ")
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '-' || c == '_' || c == '.'
}

fn valid_ident(s: &str) -> bool {
    !s.is_empty() && s.chars().all(is_ident_char)
}

impl fmt::Display for GroundPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.name, self.args.join(","))
    }
}

impl FromStr for GroundPredicate {
    type Err = AtomSyntaxError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let err = |reason| AtomSyntaxError {
            text: text.to_string(),
            reason,
        };
        let trimmed = text.trim();
        let (name, args) = match trimmed.find('(') {
            // zero-ary atoms may be written bare
            None => (trimmed, Vec::new()),
            Some(open) => {
                let inner = trimmed[open + 1..]
                    .strip_suffix(')')
                    .ok_or_else(|| err("missing closing parenthesis"))?;
                let args = if inner.trim().is_empty() {
                    Vec::new()
                } else {
                    inner.split(',').map(|a| a.trim().to_string()).collect()
                };
                (trimmed[..open].trim(), args)
            }
        };
        if !valid_ident(name) {
            return Err(err("invalid predicate name"));
        }
        if args.iter().any(|a| !valid_ident(a)) {
            return Err(err("invalid argument"));
        }
        Ok(GroundPredicate::new(name, args))
    }
}

impl Serialize for GroundPredicate {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for GroundPredicate {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}
