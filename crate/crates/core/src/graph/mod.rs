//! The level model: a labeled directed graph whose nodes carry single-valued
//! properties and whose edges record either a direct dependency (changes to
//! the parent are mirrored to the child) or an indirect one (a plain
//! reference).
//!
//! A [`LevelGraph`] only enforces structural well-formedness on mutation
//! (unique ids, existing endpoints, no self loops, one edge per ordered
//! pair). Acyclicity, reachability and the single-direct-parent rule are
//! reported by [`validate`], since merge inputs mid-pipeline may violate
//! them temporarily.

pub(crate) mod algo;
mod validate;

use std::collections::BTreeMap;
use std::fmt;

use sha2::{Digest as _, Sha256};
use thiserror::Error;

pub use algo::{
    direct_subtree, has_path, height, heights, reachable_from_root, strongly_connected_components,
    topological_order,
};
pub use validate::{validate, ValidationReport, Violation};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("identifiers must be non-empty")]
    EmptyId,
    #[error("node kind must be non-empty")]
    EmptyKind,
    #[error("duplicate node id `{0}`")]
    DuplicateNode(NodeId),
    #[error("unknown node `{0}`")]
    UnknownNode(NodeId),
    #[error("edge `{0}` -> `{0}` is a self loop")]
    SelfLoop(NodeId),
    #[error("duplicate edge `{parent}` -> `{child}`")]
    DuplicateEdge { parent: NodeId, child: NodeId },
    #[error("the scene root `{0}` cannot be removed")]
    RootRemoval(NodeId),
}

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(String);

        impl $name {
            pub fn new(token: impl Into<String>) -> Result<Self, GraphError> {
                let token = token.into();
                if token.is_empty() {
                    return Err(GraphError::EmptyId);
                }
                Ok(Self(token))
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        /// Panics on an empty string; use `new` for untrusted input.
        impl From<&str> for $name {
            fn from(token: &str) -> Self {
                Self::new(token).expect("identifier must be non-empty")
            }
        }

        impl From<String> for $name {
            fn from(token: String) -> Self {
                Self::new(token).expect("identifier must be non-empty")
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl std::borrow::Borrow<str> for $name {
            fn borrow(&self) -> &str {
                &self.0
            }
        }
    };
}

string_id!(
    /// Stable identity of a node across versions of the same level.
    NodeId
);
string_id!(
    /// Path-like identity of an asset referenced by a level.
    AssetId
);

/// Lowercase hex SHA-256 of an asset's content.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Digest(String);

impl Digest {
    pub fn of(content: &[u8]) -> Self {
        Digest(hex::encode(Sha256::digest(content)))
    }

    /// Accepts exactly 64 lowercase hex characters.
    pub fn parse(text: &str) -> Option<Self> {
        let ok = text.len() == 64 && text.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'));
        ok.then(|| Digest(text.to_owned()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A scalar property value. Aggregates such as vectors are flattened into
/// several keys (`position.x`, `position.y`, ...).
///
/// Reals compare by bit pattern so that equality agrees with the canonical
/// text form (`0.0` and `-0.0` are different values).
#[derive(Debug, Clone)]
pub enum PropertyValue {
    Bool(bool),
    Int(i64),
    Real(f64),
    Text(String),
    Node(NodeId),
    Asset(AssetId),
}

impl PropertyValue {
    pub fn type_tag(&self) -> &'static str {
        match self {
            PropertyValue::Bool(_) => "bool",
            PropertyValue::Int(_) => "int",
            PropertyValue::Real(_) => "real",
            PropertyValue::Text(_) => "text",
            PropertyValue::Node(_) => "node",
            PropertyValue::Asset(_) => "asset",
        }
    }

    pub fn as_real(&self) -> Option<f64> {
        match self {
            PropertyValue::Real(v) => Some(*v),
            _ => None,
        }
    }
}

impl PartialEq for PropertyValue {
    fn eq(&self, other: &Self) -> bool {
        use PropertyValue::*;
        match (self, other) {
            (Bool(a), Bool(b)) => a == b,
            (Int(a), Int(b)) => a == b,
            (Real(a), Real(b)) => a.to_bits() == b.to_bits(),
            (Text(a), Text(b)) => a == b,
            (Node(a), Node(b)) => a == b,
            (Asset(a), Asset(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for PropertyValue {}

impl fmt::Display for PropertyValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PropertyValue::Bool(v) => write!(f, "{v}"),
            PropertyValue::Int(v) => write!(f, "{v}"),
            PropertyValue::Real(v) => write!(f, "{v}"),
            PropertyValue::Text(v) => write!(f, "{v:?}"),
            PropertyValue::Node(v) => write!(f, "node:{v}"),
            PropertyValue::Asset(v) => write!(f, "asset:{v}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Dependency {
    Direct,
    Indirect,
}

impl Dependency {
    pub fn as_str(self) -> &'static str {
        match self {
            Dependency::Direct => "direct",
            Dependency::Indirect => "indirect",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        match text {
            "direct" => Some(Dependency::Direct),
            "indirect" => Some(Dependency::Indirect),
            _ => None,
        }
    }
}

impl fmt::Display for Dependency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub id: NodeId,
    /// Free-form type label such as `GameObject` or `Transform`. Immutable
    /// across versions of a level.
    pub kind: String,
    pub properties: BTreeMap<String, PropertyValue>,
}

impl Node {
    pub fn new(id: impl Into<NodeId>, kind: impl Into<String>) -> Self {
        Node {
            id: id.into(),
            kind: kind.into(),
            properties: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: impl Into<String>, value: PropertyValue) -> Self {
        self.properties.insert(key.into(), value);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub parent: NodeId,
    pub child: NodeId,
    pub dependency: Dependency,
}

impl Edge {
    pub fn new(parent: impl Into<NodeId>, child: impl Into<NodeId>, dependency: Dependency) -> Self {
        Edge {
            parent: parent.into(),
            child: child.into(),
            dependency,
        }
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {} ({})", self.parent, self.child, self.dependency)
    }
}

/// Manifest entry for an asset: its type tag (selects the merge strategy)
/// and the digest of its content.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AssetEntry {
    pub type_tag: String,
    pub digest: Digest,
}

pub type Manifest = BTreeMap<AssetId, AssetEntry>;

/// A game level: rooted labeled graph plus its asset manifest.
///
/// All collections are ordered by id, so two graphs built from the same
/// content in different orders compare (and serialize) identically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelGraph {
    root: NodeId,
    nodes: BTreeMap<NodeId, Node>,
    children: BTreeMap<NodeId, BTreeMap<NodeId, Dependency>>,
    parents: BTreeMap<NodeId, BTreeMap<NodeId, Dependency>>,
    assets: Manifest,
}

static NO_EDGES: BTreeMap<NodeId, Dependency> = BTreeMap::new();

impl LevelGraph {
    /// A graph holding only the scene root.
    pub fn new(root: Node) -> Self {
        let id = root.id.clone();
        let mut nodes = BTreeMap::new();
        nodes.insert(id.clone(), root);
        LevelGraph {
            root: id,
            nodes,
            children: BTreeMap::new(),
            parents: BTreeMap::new(),
            assets: BTreeMap::new(),
        }
    }

    pub fn root(&self) -> &NodeId {
        &self.root
    }

    pub fn node(&self, id: &NodeId) -> Option<&Node> {
        self.nodes.get(id)
    }

    pub fn contains(&self, id: &NodeId) -> bool {
        self.nodes.contains_key(id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    pub fn node_ids(&self) -> impl Iterator<Item = &NodeId> {
        self.nodes.keys()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.children.values().map(BTreeMap::len).sum()
    }

    /// Edges ordered by `(parent, child)`.
    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.children.iter().flat_map(|(parent, kids)| {
            kids.iter().map(move |(child, dep)| Edge {
                parent: parent.clone(),
                child: child.clone(),
                dependency: *dep,
            })
        })
    }

    pub fn edge(&self, parent: &NodeId, child: &NodeId) -> Option<Dependency> {
        self.children.get(parent)?.get(child).copied()
    }

    pub fn children(&self, id: &NodeId) -> &BTreeMap<NodeId, Dependency> {
        self.children.get(id).unwrap_or(&NO_EDGES)
    }

    pub fn parents(&self, id: &NodeId) -> &BTreeMap<NodeId, Dependency> {
        self.parents.get(id).unwrap_or(&NO_EDGES)
    }

    /// The parent reached through a direct edge. If a malformed graph has
    /// several, the smallest id is returned.
    pub fn direct_parent(&self, id: &NodeId) -> Option<&NodeId> {
        self.parents(id)
            .iter()
            .find(|(_, dep)| **dep == Dependency::Direct)
            .map(|(p, _)| p)
    }

    pub fn assets(&self) -> &Manifest {
        &self.assets
    }

    pub fn add_node(&mut self, node: Node) -> Result<(), GraphError> {
        if node.kind.is_empty() {
            return Err(GraphError::EmptyKind);
        }
        if self.nodes.contains_key(&node.id) {
            return Err(GraphError::DuplicateNode(node.id));
        }
        self.nodes.insert(node.id.clone(), node);
        Ok(())
    }

    /// Removes a node together with all incident edges.
    pub fn remove_node(&mut self, id: &NodeId) -> Result<Node, GraphError> {
        if *id == self.root {
            return Err(GraphError::RootRemoval(id.clone()));
        }
        let node = self
            .nodes
            .remove(id)
            .ok_or_else(|| GraphError::UnknownNode(id.clone()))?;
        if let Some(kids) = self.children.remove(id) {
            for child in kids.keys() {
                detach(&mut self.parents, child, id);
            }
        }
        if let Some(pars) = self.parents.remove(id) {
            for parent in pars.keys() {
                detach(&mut self.children, parent, id);
            }
        }
        Ok(node)
    }

    pub fn add_edge(
        &mut self,
        parent: &NodeId,
        child: &NodeId,
        dependency: Dependency,
    ) -> Result<(), GraphError> {
        if self.edge(parent, child).is_some() {
            return Err(GraphError::DuplicateEdge {
                parent: parent.clone(),
                child: child.clone(),
            });
        }
        self.set_edge(parent, child, dependency)
    }

    /// Inserts the edge or overwrites its dependency kind.
    pub fn set_edge(
        &mut self,
        parent: &NodeId,
        child: &NodeId,
        dependency: Dependency,
    ) -> Result<(), GraphError> {
        for id in [parent, child] {
            if !self.nodes.contains_key(id) {
                return Err(GraphError::UnknownNode(id.clone()));
            }
        }
        if parent == child {
            return Err(GraphError::SelfLoop(parent.clone()));
        }
        self.children
            .entry(parent.clone())
            .or_default()
            .insert(child.clone(), dependency);
        self.parents
            .entry(child.clone())
            .or_default()
            .insert(parent.clone(), dependency);
        Ok(())
    }

    pub fn remove_edge(&mut self, parent: &NodeId, child: &NodeId) -> Option<Dependency> {
        let dep = self.children.get_mut(parent)?.remove(child)?;
        if self.children.get(parent).is_some_and(BTreeMap::is_empty) {
            self.children.remove(parent);
        }
        detach(&mut self.parents, child, parent);
        Some(dep)
    }

    pub fn set_property(
        &mut self,
        id: &NodeId,
        key: impl Into<String>,
        value: PropertyValue,
    ) -> Result<Option<PropertyValue>, GraphError> {
        let node = self
            .nodes
            .get_mut(id)
            .ok_or_else(|| GraphError::UnknownNode(id.clone()))?;
        Ok(node.properties.insert(key.into(), value))
    }

    pub fn remove_property(
        &mut self,
        id: &NodeId,
        key: &str,
    ) -> Result<Option<PropertyValue>, GraphError> {
        let node = self
            .nodes
            .get_mut(id)
            .ok_or_else(|| GraphError::UnknownNode(id.clone()))?;
        Ok(node.properties.remove(key))
    }

    pub fn insert_asset(&mut self, id: AssetId, entry: AssetEntry) -> Option<AssetEntry> {
        self.assets.insert(id, entry)
    }

    pub fn remove_asset(&mut self, id: &AssetId) -> Option<AssetEntry> {
        self.assets.remove(id)
    }

    pub fn set_manifest(&mut self, manifest: Manifest) {
        self.assets = manifest;
    }
}

fn detach(map: &mut BTreeMap<NodeId, BTreeMap<NodeId, Dependency>>, key: &NodeId, other: &NodeId) {
    if let Some(inner) = map.get_mut(key) {
        inner.remove(other);
        if inner.is_empty() {
            map.remove(key);
        }
    }
}
