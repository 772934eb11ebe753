//! Three-way change classification of one level version against its
//! ancestor.
//!
//! A node is *intrinsically* modified when its own properties or incoming
//! edges changed. Modification then propagates down direct edges of the
//! edited version: a node whose direct ancestor chain contains an intrinsic
//! edit is marked modified too, with `intrinsic = false`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::graph::{validate, Dependency, Edge, LevelGraph, NodeId, PropertyValue, ValidationReport};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiffError {
    #[error("root mismatch: `{ancestor}` vs `{version}` (not the same level)")]
    RootMismatch { ancestor: NodeId, version: NodeId },
    #[error("node `{node}` changed kind from `{from}` to `{to}`")]
    KindChanged { node: NodeId, from: String, to: String },
    #[error("invalid {which} graph:\n{report}")]
    InvalidGraph { which: &'static str, report: ValidationReport },
    #[error("diff does not describe this version (node `{0}`)")]
    Mismatch(NodeId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ChangeClass {
    Unchanged,
    Added,
    Deleted,
    Modified,
}

impl fmt::Display for ChangeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChangeClass::Unchanged => "unchanged",
            ChangeClass::Added => "added",
            ChangeClass::Deleted => "deleted",
            ChangeClass::Modified => "modified",
        })
    }
}

/// Change of a node's direct parent. `None` means "no direct parent".
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reparent {
    pub from: Option<NodeId>,
    pub to: Option<NodeId>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NodeDelta {
    pub property_sets: BTreeMap<String, PropertyValue>,
    pub property_removals: BTreeSet<String>,
    pub reparent: Option<Reparent>,
    /// Incoming edges present in both versions whose kind changed, keyed by
    /// parent.
    pub dependency_kind_changes: BTreeMap<NodeId, Dependency>,
    /// False when the node is modified only by propagation.
    pub intrinsic: bool,
}

impl NodeDelta {
    pub fn is_empty(&self) -> bool {
        self.property_sets.is_empty()
            && self.property_removals.is_empty()
            && self.reparent.is_none()
            && self.dependency_kind_changes.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffResult {
    pub root: NodeId,
    pub classes: BTreeMap<NodeId, ChangeClass>,
    /// Present for every added or modified node.
    pub deltas: BTreeMap<NodeId, NodeDelta>,
    /// Ordered pairs present only in the version.
    pub added_edges: BTreeSet<Edge>,
    /// Ordered pairs present only in the ancestor.
    pub removed_edges: BTreeSet<Edge>,
}

impl DiffResult {
    pub fn class(&self, id: &NodeId) -> Option<ChangeClass> {
        self.classes.get(id).copied()
    }

    pub fn nodes_in(&self, class: ChangeClass) -> impl Iterator<Item = &NodeId> {
        self.classes
            .iter()
            .filter(move |(_, c)| **c == class)
            .map(|(id, _)| id)
    }

    /// Added, deleted and intrinsically modified nodes.
    pub fn intrinsic_edits(&self) -> BTreeSet<NodeId> {
        self.classes
            .iter()
            .filter(|(id, c)| match c {
                ChangeClass::Added | ChangeClass::Deleted => true,
                ChangeClass::Modified => self.deltas[*id].intrinsic,
                ChangeClass::Unchanged => false,
            })
            .map(|(id, _)| id.clone())
            .collect()
    }

    pub fn is_identity(&self) -> bool {
        self.classes.values().all(|c| *c == ChangeClass::Unchanged)
    }
}

/// Classifies every node of `ancestor ∪ version`.
pub fn classify(ancestor: &LevelGraph, version: &LevelGraph) -> Result<DiffResult, DiffError> {
    if ancestor.root() != version.root() {
        return Err(DiffError::RootMismatch {
            ancestor: ancestor.root().clone(),
            version: version.root().clone(),
        });
    }
    for (which, graph) in [("ancestor", ancestor), ("version", version)] {
        let report = validate(graph);
        if !report.is_valid() {
            return Err(DiffError::InvalidGraph { which, report });
        }
    }
    classify_unchecked(ancestor, version)
}

/// Classification without validating the inputs. Kind changes are still
/// rejected.
pub(crate) fn classify_unchecked(
    ancestor: &LevelGraph,
    version: &LevelGraph,
) -> Result<DiffResult, DiffError> {
    let mut classes = BTreeMap::new();
    let mut deltas = BTreeMap::new();
    let mut added_edges = BTreeSet::new();
    let mut removed_edges = BTreeSet::new();

    for old in ancestor.nodes() {
        if !version.contains(&old.id) {
            classes.insert(old.id.clone(), ChangeClass::Deleted);
            for (parent, dep) in ancestor.parents(&old.id) {
                removed_edges.insert(Edge::new(parent.clone(), old.id.clone(), *dep));
            }
        }
    }

    for new in version.nodes() {
        let id = &new.id;
        let Some(old) = ancestor.node(id) else {
            classes.insert(id.clone(), ChangeClass::Added);
            for (parent, dep) in version.parents(id) {
                added_edges.insert(Edge::new(parent.clone(), id.clone(), *dep));
            }
            deltas.insert(
                id.clone(),
                NodeDelta {
                    property_sets: new.properties.clone(),
                    reparent: Some(Reparent {
                        from: None,
                        to: version.direct_parent(id).cloned(),
                    }),
                    intrinsic: true,
                    ..NodeDelta::default()
                },
            );
            continue;
        };
        if old.kind != new.kind {
            return Err(DiffError::KindChanged {
                node: id.clone(),
                from: old.kind.clone(),
                to: new.kind.clone(),
            });
        }

        let mut delta = NodeDelta::default();
        for (key, value) in &new.properties {
            if old.properties.get(key) != Some(value) {
                delta.property_sets.insert(key.clone(), value.clone());
            }
        }
        for key in old.properties.keys() {
            if !new.properties.contains_key(key) {
                delta.property_removals.insert(key.clone());
            }
        }

        let old_parents = ancestor.parents(id);
        let new_parents = version.parents(id);
        for (parent, dep) in new_parents {
            match old_parents.get(parent) {
                None => {
                    added_edges.insert(Edge::new(parent.clone(), id.clone(), *dep));
                }
                Some(old_dep) if old_dep != dep => {
                    delta.dependency_kind_changes.insert(parent.clone(), *dep);
                }
                Some(_) => {}
            }
        }
        let mut edges_changed = !delta.dependency_kind_changes.is_empty();
        for (parent, dep) in old_parents {
            if !new_parents.contains_key(parent) {
                removed_edges.insert(Edge::new(parent.clone(), id.clone(), *dep));
                edges_changed = true;
            }
        }
        edges_changed |= new_parents.keys().any(|p| !old_parents.contains_key(p));

        let from = ancestor.direct_parent(id);
        let to = version.direct_parent(id);
        if from != to {
            delta.reparent = Some(Reparent {
                from: from.cloned(),
                to: to.cloned(),
            });
        }

        let intrinsic = !delta.is_empty() || edges_changed;
        if intrinsic {
            delta.intrinsic = true;
            classes.insert(id.clone(), ChangeClass::Modified);
            deltas.insert(id.clone(), delta);
        } else {
            classes.insert(id.clone(), ChangeClass::Unchanged);
        }
    }

    // Propagate along direct edges of the version graph.
    let mut stack: Vec<&NodeId> = deltas
        .iter()
        .filter(|(id, d)| d.intrinsic && classes[*id] == ChangeClass::Modified)
        .map(|(id, _)| id)
        .collect();
    let mut propagated = BTreeSet::new();
    while let Some(v) = stack.pop() {
        for (child, dep) in version.children(v) {
            if *dep == Dependency::Direct
                && classes[child] == ChangeClass::Unchanged
                && propagated.insert(child.clone())
            {
                stack.push(child);
            }
        }
    }
    for id in propagated {
        classes.insert(id.clone(), ChangeClass::Modified);
        deltas.insert(id, NodeDelta::default());
    }

    Ok(DiffResult {
        root: version.root().clone(),
        classes,
        deltas,
        added_edges,
        removed_edges,
    })
}

/// The edited part of a version: added and modified nodes with the edges
/// between them. Deleted nodes are listed separately since the version no
/// longer has them.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DiffGraph {
    pub nodes: BTreeSet<NodeId>,
    pub edges: Vec<Edge>,
    pub deleted: BTreeSet<NodeId>,
}

pub fn induced_diff_graph(version: &LevelGraph, diff: &DiffResult) -> Result<DiffGraph, DiffError> {
    if diff.root != *version.root() {
        return Err(DiffError::Mismatch(version.root().clone()));
    }
    for id in version.node_ids() {
        match diff.class(id) {
            None | Some(ChangeClass::Deleted) => return Err(DiffError::Mismatch(id.clone())),
            _ => {}
        }
    }
    let mut out = DiffGraph::default();
    for (id, class) in &diff.classes {
        match class {
            ChangeClass::Deleted => {
                if version.contains(id) {
                    return Err(DiffError::Mismatch(id.clone()));
                }
                out.deleted.insert(id.clone());
            }
            _ if !version.contains(id) => return Err(DiffError::Mismatch(id.clone())),
            ChangeClass::Added | ChangeClass::Modified => {
                out.nodes.insert(id.clone());
            }
            ChangeClass::Unchanged => {}
        }
    }
    out.edges = version
        .edges()
        .filter(|e| out.nodes.contains(&e.parent) && out.nodes.contains(&e.child))
        .collect();
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DiffStats {
    pub added: usize,
    pub deleted: usize,
    pub modified_intrinsic: usize,
    pub modified_propagated: usize,
    pub total_edited: usize,
}

pub fn diff_stats(diff: &DiffResult) -> DiffStats {
    let mut stats = DiffStats::default();
    for (id, class) in &diff.classes {
        match class {
            ChangeClass::Added => stats.added += 1,
            ChangeClass::Deleted => stats.deleted += 1,
            ChangeClass::Modified if diff.deltas[id].intrinsic => stats.modified_intrinsic += 1,
            ChangeClass::Modified => stats.modified_propagated += 1,
            ChangeClass::Unchanged => {}
        }
    }
    stats.total_edited =
        stats.added + stats.deleted + stats.modified_intrinsic + stats.modified_propagated;
    stats
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Node;
    use Dependency::{Direct, Indirect};

    fn chain() -> LevelGraph {
        let mut g = LevelGraph::new(Node::new("root", "Scene"));
        g.add_node(Node::new("A", "GameObject").with("x", PropertyValue::Real(1.0))).unwrap();
        g.add_node(Node::new("B", "Transform")).unwrap();
        g.add_edge(&"root".into(), &"A".into(), Direct).unwrap();
        g.add_edge(&"A".into(), &"B".into(), Direct).unwrap();
        g
    }

    /// Independent closure: modified-by-propagation iff some node on the
    /// direct-parent chain (in the version) is intrinsically edited.
    fn brute_propagated(version: &LevelGraph, intrinsic: &BTreeSet<NodeId>, id: &NodeId) -> bool {
        let mut at = version.direct_parent(id);
        while let Some(p) = at {
            if intrinsic.contains(p) {
                return true;
            }
            at = version.direct_parent(p);
        }
        false
    }

    #[test]
    fn identity_diff_is_empty() {
        let g = chain();
        let d = classify(&g, &g).unwrap();
        assert!(d.is_identity());
        assert!(d.deltas.is_empty());
        assert_eq!(diff_stats(&d), DiffStats::default());
        assert_eq!(induced_diff_graph(&g, &d).unwrap(), DiffGraph::default());
    }

    #[test]
    fn property_edit_propagates_down_direct_chain() {
        let anc = chain();
        let mut ver = anc.clone();
        ver.set_property(&"A".into(), "x", PropertyValue::Real(2.0)).unwrap();
        let d = classify(&anc, &ver).unwrap();
        assert_eq!(d.class(&"A".into()), Some(ChangeClass::Modified));
        assert!(d.deltas[&NodeId::from("A")].intrinsic);
        assert_eq!(d.class(&"B".into()), Some(ChangeClass::Modified));
        assert!(!d.deltas[&NodeId::from("B")].intrinsic);
        assert_eq!(d.class(&"root".into()), Some(ChangeClass::Unchanged));

        let intrinsic = BTreeSet::from(["A".into()]);
        for id in ver.node_ids() {
            let expect = !intrinsic.contains(id) && brute_propagated(&ver, &intrinsic, id);
            let got = d.deltas.get(id).is_some_and(|x| !x.intrinsic);
            assert_eq!(expect, got, "{id}");
        }

        let induced = induced_diff_graph(&ver, &d).unwrap();
        assert_eq!(induced.nodes, BTreeSet::from(["A".into(), "B".into()]));
        assert_eq!(induced.edges, vec![Edge::new("A", "B", Direct)]);
        let stats = diff_stats(&d);
        assert_eq!((stats.modified_intrinsic, stats.modified_propagated, stats.total_edited), (1, 1, 2));
    }

    #[test]
    fn modified_leaf_induces_single_node() {
        let anc = chain();
        let mut ver = anc.clone();
        ver.set_property(&"B".into(), "y", PropertyValue::Int(3)).unwrap();
        let d = classify(&anc, &ver).unwrap();
        let induced = induced_diff_graph(&ver, &d).unwrap();
        assert_eq!(induced.nodes, BTreeSet::from(["B".into()]));
        assert!(induced.edges.is_empty());
    }

    #[test]
    fn edge_changes_are_intrinsic_on_the_child() {
        let anc = chain();
        let mut ver = anc.clone();
        ver.set_edge(&"A".into(), &"B".into(), Indirect).unwrap();
        ver.add_edge(&"root".into(), &"B".into(), Direct).unwrap();
        let d = classify(&anc, &ver).unwrap();
        let delta = &d.deltas[&NodeId::from("B")];
        assert!(delta.intrinsic);
        assert_eq!(delta.dependency_kind_changes.get(&NodeId::from("A")), Some(&Indirect));
        assert_eq!(
            delta.reparent,
            Some(Reparent { from: Some("A".into()), to: Some("root".into()) })
        );
        assert!(d.added_edges.contains(&Edge::new("root", "B", Direct)));
        assert_eq!(d.class(&"A".into()), Some(ChangeClass::Unchanged));
    }

    #[test]
    fn errors() {
        let anc = chain();
        let other = LevelGraph::new(Node::new("scene", "Scene"));
        assert!(matches!(classify(&anc, &other), Err(DiffError::RootMismatch { .. })));

        let mut kind = LevelGraph::new(Node::new("root", "Scene"));
        kind.add_node(Node::new("A", "Light")).unwrap();
        kind.add_edge(&"root".into(), &"A".into(), Direct).unwrap();
        assert!(matches!(classify(&anc, &kind), Err(DiffError::KindChanged { .. })));

        let mut bad = anc.clone();
        bad.add_node(Node::new("orphan", "X")).unwrap();
        assert!(matches!(classify(&anc, &bad), Err(DiffError::InvalidGraph { .. })));

        let d = classify(&anc, &anc).unwrap();
        assert_eq!(induced_diff_graph(&bad, &d), Err(DiffError::Mismatch("orphan".into())));
    }

    #[test]
    fn add_and_delete() {
        let anc = chain();
        let mut ver = anc.clone();
        ver.remove_node(&"B".into()).unwrap();
        ver.add_node(Node::new("C", "Light")).unwrap();
        ver.add_edge(&"A".into(), &"C".into(), Direct).unwrap();
        let d = classify(&anc, &ver).unwrap();
        assert_eq!(d.class(&"B".into()), Some(ChangeClass::Deleted));
        assert_eq!(d.class(&"C".into()), Some(ChangeClass::Added));
        assert_eq!(d.class(&"A".into()), Some(ChangeClass::Unchanged));
        let c = &d.deltas[&NodeId::from("C")];
        assert_eq!(c.reparent.as_ref().unwrap().to, Some("A".into()));
        let s = diff_stats(&d);
        assert_eq!((s.added, s.deleted, s.total_edited), (1, 1, 2));
        assert!(!induced_diff_graph(&ver, &d).unwrap().nodes.contains(&NodeId::from("B")));
    }
}
