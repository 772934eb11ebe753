use std::collections::BTreeSet;

use crate::graph::{
    direct_subtree, has_path, reachable_from_root, validate, Dependency, LevelGraph, Node, PropertyValue,
};

use super::{EditOp, SimError};

/// Applies `script` to a copy of `graph` and validates the result.
pub fn apply_script(graph: &LevelGraph, script: &[EditOp]) -> Result<LevelGraph, SimError> {
    let mut g = graph.clone();
    for (index, op) in script.iter().enumerate() {
        apply_op(&mut g, op).map_err(|reason| SimError::Inapplicable {
            index,
            op: op.to_string(),
            reason,
        })?;
    }
    let report = validate(&g);
    if !report.is_valid() {
        return Err(SimError::InvalidResult(report));
    }
    Ok(g)
}

fn require(condition: bool, reason: &str) -> Result<(), String> {
    if condition {
        Ok(())
    } else {
        Err(reason.to_owned())
    }
}

fn check_reference(g: &LevelGraph, value: &PropertyValue) -> Result<(), String> {
    match value {
        PropertyValue::Node(target) => require(g.contains(target), "reference to a missing node"),
        PropertyValue::Asset(asset) => require(g.assets().contains_key(asset), "reference to a missing asset"),
        _ => Ok(()),
    }
}

/// Applies one operation in place. On error the graph may be partially
/// modified.
pub fn apply_op(g: &mut LevelGraph, op: &EditOp) -> Result<(), String> {
    match op {
        EditOp::AddNode { id, kind, parent, properties } => {
            require(!g.contains(id), "node already exists")?;
            require(g.contains(parent), "parent does not exist")?;
            for value in properties.values() {
                check_reference(g, value)?;
            }
            let mut node = Node::new(id.clone(), kind.clone());
            node.properties = properties.clone();
            g.add_node(node).map_err(|e| e.to_string())?;
            g.add_edge(parent, id, Dependency::Direct).map_err(|e| e.to_string())
        }
        EditOp::DeleteNode { id } => delete_cascade(g, id),
        EditOp::SetProperty { id, key, value } => {
            require(g.contains(id), "node does not exist")?;
            check_reference(g, value)?;
            g.set_property(id, key.clone(), value.clone()).map_err(|e| e.to_string())?;
            Ok(())
        }
        EditOp::RemoveProperty { id, key } => {
            let removed = g.remove_property(id, key).map_err(|e| e.to_string())?;
            require(removed.is_some(), "property does not exist")
        }
        EditOp::Reparent { id, new_parent } => {
            require(id != g.root(), "cannot reparent the root")?;
            require(g.contains(id) && g.contains(new_parent), "node does not exist")?;
            require(g.direct_parent(id) != Some(new_parent), "already the direct parent")?;
            require(!has_path(g, id, new_parent), "would create a cycle")?;
            if let Some(old) = g.direct_parent(id).cloned() {
                g.remove_edge(&old, id);
            }
            g.set_edge(new_parent, id, Dependency::Direct).map_err(|e| e.to_string())?;
            require(reachable_from_root(g).len() == g.node_count(), "would disconnect nodes")
        }
        EditOp::ChangeDepKind { parent, child, dependency } => {
            let current = g.edge(parent, child).ok_or("edge does not exist")?;
            require(current != *dependency, "edge already has that kind")?;
            if *dependency == Dependency::Direct {
                require(g.direct_parent(child).is_none(), "child already has a direct parent")?;
            }
            g.set_edge(parent, child, *dependency).map_err(|e| e.to_string())
        }
        EditOp::AddIndirectEdge { parent, child } => {
            require(child != g.root(), "the root cannot have parents")?;
            require(g.contains(parent) && g.contains(child), "node does not exist")?;
            require(g.edge(parent, child).is_none(), "edge already exists")?;
            require(!has_path(g, child, parent), "would create a cycle")?;
            g.add_edge(parent, child, Dependency::Indirect).map_err(|e| e.to_string())
        }
        EditOp::RemoveIndirectEdge { parent, child } => {
            require(g.edge(parent, child) == Some(Dependency::Indirect), "no indirect edge")?;
            g.remove_edge(parent, child);
            require(reachable_from_root(g).contains(child), "would disconnect the child")
        }
    }
}

/// Deletes a node with its direct subtree. Survivors cut off from the root
/// are re-attached to the deleted node's direct parent (the root if it has
/// none), keeping the kind of the severed edge; references into the
/// deleted set are removed.
fn delete_cascade(g: &mut LevelGraph, id: &crate::graph::NodeId) -> Result<(), String> {
    require(id != g.root(), "cannot delete the root")?;
    let doomed = direct_subtree(g, id).map_err(|e| e.to_string())?;
    let anchor = g.direct_parent(id).cloned().unwrap_or_else(|| g.root().clone());

    let mut severed: Vec<(crate::graph::NodeId, Dependency)> = Vec::new();
    for d in &doomed {
        for (child, dep) in g.children(d) {
            if !doomed.contains(child) {
                severed.push((child.clone(), *dep));
            }
        }
    }
    severed.sort();
    for d in &doomed {
        g.remove_node(d).map_err(|e| e.to_string())?;
    }

    let stale: Vec<(crate::graph::NodeId, String)> = g
        .nodes()
        .flat_map(|n| {
            n.properties
                .iter()
                .filter(|(_, v)| matches!(v, PropertyValue::Node(t) if doomed.contains(t)))
                .map(|(k, _)| (n.id.clone(), k.clone()))
        })
        .collect();
    for (node, key) in stale {
        g.remove_property(&node, &key).map_err(|e| e.to_string())?;
    }

    let mut reached = reachable_from_root(g);
    let mut done = BTreeSet::new();
    for (child, dep) in severed {
        if reached.contains(&child) || !done.insert(child.clone()) {
            continue;
        }
        let parent = if has_path(g, &child, &anchor) { g.root().clone() } else { anchor.clone() };
        let dep = if dep == Dependency::Direct && g.direct_parent(&child).is_none() {
            Dependency::Direct
        } else {
            Dependency::Indirect
        };
        g.set_edge(&parent, &child, dep).map_err(|e| e.to_string())?;
        reached = reachable_from_root(g);
    }
    Ok(())
}
