//! Identifiers for graph nodes and undirected edges.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Name of a tradeable asset, macro indicator or news entity.
///
/// Ordering is plain lexicographic byte order, which the rest of the crate
/// relies on for deterministic iteration and tie-breaking.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(String);

impl EntityId {
    pub fn new(s: impl Into<String>) -> Self {
        EntityId(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl From<&str> for EntityId {
    fn from(s: &str) -> Self {
        EntityId(s.to_owned())
    }
}

impl From<String> for EntityId {
    fn from(s: String) -> Self {
        EntityId(s)
    }
}

/// Canonical key for an undirected edge: endpoints stored in sorted order,
/// never equal.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeKey {
    a: EntityId,
    b: EntityId,
}

impl EdgeKey {
    /// Build a key from two distinct endpoints, sorting them; `None` for a
    /// self loop.
    pub fn new(u: EntityId, v: EntityId) -> Option<Self> {
        match u.cmp(&v) {
            std::cmp::Ordering::Less => Some(EdgeKey { a: u, b: v }),
            std::cmp::Ordering::Greater => Some(EdgeKey { a: v, b: u }),
            std::cmp::Ordering::Equal => None,
        }
    }

    pub fn first(&self) -> &EntityId {
        &self.a
    }

    pub fn second(&self) -> &EntityId {
        &self.b
    }

    /// Both endpoints in canonical order.
    pub fn endpoints(&self) -> (&EntityId, &EntityId) {
        (&self.a, &self.b)
    }

    /// The endpoint opposite to `node`, if `node` is on this edge.
    pub fn other(&self, node: &EntityId) -> Option<&EntityId> {
        if *node == self.a {
            Some(&self.b)
        } else if *node == self.b {
            Some(&self.a)
        } else {
            None
        }
    }

    pub fn touches(&self, node: &EntityId) -> bool {
        *node == self.a || *node == self.b
    }
}

impl fmt::Display for EdgeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.a, self.b)
    }
}

impl fmt::Debug for EdgeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:?}, {:?})", self.a, self.b)
    }
}
