//! Per-node three-way merging. A node's mergeable state is split into
//! slots (each property key, and the set of incoming edges); each slot is
//! merged independently against the ancestor.

use std::collections::{BTreeMap, BTreeSet};

use crate::graph::{Dependency, LevelGraph, NodeId, PropertyValue};

use super::{Branch, ConflictKind, MergePolicy};

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct NodeState {
    pub kind: String,
    pub properties: BTreeMap<String, PropertyValue>,
    /// Incoming edges keyed by parent.
    pub parents: BTreeMap<NodeId, Dependency>,
}

impl NodeState {
    pub fn direct_parent(&self) -> Option<&NodeId> {
        direct_parent(&self.parents)
    }
}

pub(crate) fn direct_parent(parents: &BTreeMap<NodeId, Dependency>) -> Option<&NodeId> {
    parents
        .iter()
        .find(|(_, d)| **d == Dependency::Direct)
        .map(|(p, _)| p)
}

pub(crate) fn states_of(graph: &LevelGraph) -> BTreeMap<NodeId, NodeState> {
    graph
        .nodes()
        .map(|n| {
            (
                n.id.clone(),
                NodeState {
                    kind: n.kind.clone(),
                    properties: n.properties.clone(),
                    parents: graph.parents(&n.id).clone(),
                },
            )
        })
        .collect()
}

/// Classic three-way choice. `Err` when both sides changed differently.
pub(crate) fn three_way<'v, T: PartialEq + ?Sized>(
    ancestor: Option<&'v T>,
    a: Option<&'v T>,
    b: Option<&'v T>,
) -> Result<Option<&'v T>, ()> {
    if a == b || b == ancestor {
        Ok(a)
    } else if a == ancestor {
        Ok(b)
    } else {
        Err(())
    }
}

/// Merges incoming-edge maps key by key. `None` when a key conflicts or the
/// union would give the node more than one direct parent.
pub(crate) fn merge_parents(
    ancestor: &BTreeMap<NodeId, Dependency>,
    a: &BTreeMap<NodeId, Dependency>,
    b: &BTreeMap<NodeId, Dependency>,
) -> Option<BTreeMap<NodeId, Dependency>> {
    if a == b || b == ancestor {
        return Some(a.clone());
    }
    if a == ancestor {
        return Some(b.clone());
    }
    let keys: BTreeSet<&NodeId> = ancestor.keys().chain(a.keys()).chain(b.keys()).collect();
    let mut merged = BTreeMap::new();
    for key in keys {
        let dep = three_way(ancestor.get(key), a.get(key), b.get(key)).ok()?;
        if let Some(dep) = dep {
            merged.insert(key.clone(), *dep);
        }
    }
    let direct = merged.values().filter(|d| **d == Dependency::Direct).count();
    (direct <= 1).then_some(merged)
}

/// Mean of two concurrent real edits when the policy allows averaging for
/// this node kind.
pub(crate) fn averaged(
    policy: &MergePolicy,
    kind: &str,
    a: Option<&PropertyValue>,
    b: Option<&PropertyValue>,
) -> Option<PropertyValue> {
    if !policy.numeric_averaging || !policy.averageable_kinds.contains(kind) {
        return None;
    }
    let (x, y) = (a?.as_real()?, b?.as_real()?);
    Some(PropertyValue::Real((x + y) / 2.0))
}

/// Conflicts between two present versions of one node. `ancestor` is `None`
/// when both branches added the node.
pub(crate) fn detect(
    id: &NodeId,
    ancestor: Option<&NodeState>,
    a: &NodeState,
    b: &NodeState,
    policy: &MergePolicy,
) -> Vec<ConflictKind> {
    let mut found = Vec::new();
    if a == b {
        return found;
    }
    let empty_props = BTreeMap::new();
    let empty_parents = BTreeMap::new();
    let anc_props = ancestor.map_or(&empty_props, |s| &s.properties);
    let anc_parents = ancestor.map_or(&empty_parents, |s| &s.parents);

    let keys: BTreeSet<&String> = a.properties.keys().chain(b.properties.keys()).collect();
    for key in keys {
        let (av, bv) = (a.properties.get(key), b.properties.get(key));
        if three_way(anc_props.get(key), av, bv).is_ok() || averaged(policy, &a.kind, av, bv).is_some() {
            continue;
        }
        found.push(match ancestor {
            Some(_) => ConflictKind::Property {
                node: id.clone(),
                key: key.clone(),
                ancestor: anc_props.get(key).cloned(),
                a: av.cloned(),
                b: bv.cloned(),
            },
            None => ConflictKind::AddAdd {
                node: id.clone(),
                key: key.clone(),
                a: av.cloned(),
                b: bv.cloned(),
            },
        });
    }

    if merge_parents(anc_parents, &a.parents, &b.parents).is_none() {
        found.push(ConflictKind::Reparent {
            node: id.clone(),
            parent_a: a.direct_parent().cloned(),
            parent_b: b.direct_parent().cloned(),
        });
    }
    found
}

/// Items a branch is barred from contributing. A held item falls back to the
/// ancestor's state.
#[derive(Debug, Clone, Default)]
pub(crate) struct Holds {
    pub whole: BTreeSet<NodeId>,
    pub properties: BTreeSet<(NodeId, String)>,
    pub structure: BTreeSet<NodeId>,
}

impl Holds {
    /// Records the items of `kind` that belong to `branch`.
    pub fn hold(&mut self, kind: &ConflictKind, branch: Branch) {
        match kind {
            ConflictKind::Property { node, key, .. } | ConflictKind::AddAdd { node, key, .. } => {
                self.properties.insert((node.clone(), key.clone()));
            }
            ConflictKind::Reparent { node, .. } => {
                self.structure.insert(node.clone());
            }
            ConflictKind::DeleteModify {
                deleting,
                group,
                touched,
                ..
            } => {
                let items = if *deleting == branch { group } else { touched };
                self.whole.extend(items.iter().cloned());
            }
            ConflictKind::Asset { .. } => {}
        }
    }
}

/// The merged state of one node given what each branch is barred from
/// contributing. `None` means the node is absent from the merge.
pub(crate) fn settle(
    id: &NodeId,
    ancestor: Option<&NodeState>,
    a: Option<&NodeState>,
    b: Option<&NodeState>,
    holds: &[Holds; 2],
    policy: &MergePolicy,
) -> Option<NodeState> {
    let a = if holds[0].whole.contains(id) { ancestor } else { a };
    let b = if holds[1].whole.contains(id) { ancestor } else { b };

    let (a, b) = match (a, b) {
        (None, None) => return None,
        (Some(x), None) | (None, Some(x)) => {
            // Added by one branch, or deleted by one with the other untouched.
            return match ancestor {
                None => Some(x.clone()),
                Some(anc) if anc == x => None,
                // Unresolved delete/modify; keep the ancestor.
                Some(anc) => Some(anc.clone()),
            };
        }
        (Some(a), Some(b)) => (a, b),
    };

    let empty_props = BTreeMap::new();
    let empty_parents = BTreeMap::new();
    let anc_props = ancestor.map_or(&empty_props, |s| &s.properties);
    let anc_parents = ancestor.map_or(&empty_parents, |s| &s.parents);

    let mut properties = BTreeMap::new();
    let keys: BTreeSet<&String> = anc_props
        .keys()
        .chain(a.properties.keys())
        .chain(b.properties.keys())
        .collect();
    for key in keys {
        let anc_v = anc_props.get(key);
        let held = |side: usize| holds[side].properties.contains(&(id.clone(), key.clone()));
        let av = if held(0) { anc_v } else { a.properties.get(key) };
        let bv = if held(1) { anc_v } else { b.properties.get(key) };
        let value = match three_way(anc_v, av, bv) {
            Ok(v) => v.cloned(),
            Err(()) => averaged(policy, &a.kind, av, bv).or_else(|| anc_v.cloned()),
        };
        if let Some(v) = value {
            properties.insert(key.clone(), v);
        }
    }

    let pa = if holds[0].structure.contains(id) { anc_parents } else { &a.parents };
    let pb = if holds[1].structure.contains(id) { anc_parents } else { &b.parents };
    let parents = merge_parents(anc_parents, pa, pb).unwrap_or_else(|| anc_parents.clone());

    Some(NodeState {
        kind: a.kind.clone(),
        properties,
        parents,
    })
}
