//! Turning the working copy into a valid graph: dropping edges to removed
//! nodes, scrubbing dangling references, re-attaching orphans.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::graph::{has_path, reachable_from_root, Dependency, Edge, LevelGraph, Node, NodeId, PropertyValue};

use super::node::NodeState;
use super::ScrubbedReference;

/// Builds a graph from per-node states. Edges whose parent is absent are
/// returned separately.
pub(crate) fn build(root: &NodeId, states: &BTreeMap<NodeId, NodeState>) -> (LevelGraph, Vec<Edge>) {
    let node = |id: &NodeId, s: &NodeState| Node {
        id: id.clone(),
        kind: s.kind.clone(),
        properties: s.properties.clone(),
    };
    let root_state = &states[root];
    let mut graph = LevelGraph::new(node(root, root_state));
    for (id, state) in states {
        if id != root {
            graph.add_node(node(id, state)).expect("states hold unique ids");
        }
    }
    let mut dangling = Vec::new();
    for (child, state) in states {
        for (parent, dep) in &state.parents {
            if graph.contains(parent) {
                graph.set_edge(parent, child, *dep).expect("endpoints exist");
            } else {
                dangling.push(Edge::new(parent.clone(), child.clone(), *dep));
            }
        }
    }
    (graph, dangling)
}

/// Removes node and asset references whose target is gone.
pub(crate) fn scrub_references(graph: &mut LevelGraph) -> Vec<ScrubbedReference> {
    let mut scrubbed = Vec::new();
    for node in graph.nodes() {
        for (key, value) in &node.properties {
            let missing = match value {
                PropertyValue::Node(target) => !graph.contains(target),
                PropertyValue::Asset(asset) => !graph.assets().contains_key(asset),
                _ => false,
            };
            if missing {
                scrubbed.push(ScrubbedReference {
                    node: node.id.clone(),
                    key: key.clone(),
                    value: value.clone(),
                });
            }
        }
    }
    for s in &scrubbed {
        graph.remove_property(&s.node, &s.key).expect("node exists");
    }
    scrubbed
}

fn extend_reachable(graph: &LevelGraph, from: &NodeId, reached: &mut BTreeSet<NodeId>) {
    let mut queue = VecDeque::from([from.clone()]);
    reached.insert(from.clone());
    while let Some(v) = queue.pop_front() {
        for child in graph.children(&v).keys() {
            if reached.insert(child.clone()) {
                queue.push_back(child.clone());
            }
        }
    }
}

/// Re-attaches nodes cut off by the removal of a parent. Each such node gets
/// an edge from the nearest surviving direct ancestor of the removed parent
/// (looked up in `lineage`, first match wins), keeping the severed edge's
/// kind unless the node already has a direct parent.
pub(crate) fn relink(
    graph: &mut LevelGraph,
    dangling: &[Edge],
    lineage: &[&BTreeMap<NodeId, NodeState>],
) -> Vec<Edge> {
    let mut reached = reachable_from_root(graph);
    let mut order: Vec<&Edge> = dangling.iter().collect();
    order.sort_by(|x, y| (&x.child, &x.parent).cmp(&(&y.child, &y.parent)));

    let direct_parent_of = |id: &NodeId| {
        lineage
            .iter()
            .find_map(|states| states.get(id))
            .and_then(NodeState::direct_parent)
            .cloned()
    };

    let mut added = Vec::new();
    for edge in order {
        let child = &edge.child;
        if reached.contains(child) || !graph.contains(child) {
            continue;
        }
        let mut target = graph.root().clone();
        let mut seen = BTreeSet::from([edge.parent.clone()]);
        let mut at = direct_parent_of(&edge.parent);
        while let Some(candidate) = at {
            if !seen.insert(candidate.clone()) {
                break;
            }
            if reached.contains(&candidate) && candidate != *child && !has_path(graph, child, &candidate) {
                target = candidate;
                break;
            }
            at = direct_parent_of(&candidate);
        }
        if graph.edge(&target, child).is_some() {
            continue;
        }
        let dependency = match edge.dependency {
            Dependency::Direct if graph.direct_parent(child).is_none() => Dependency::Direct,
            _ => Dependency::Indirect,
        };
        graph.set_edge(&target, child, dependency).expect("endpoints exist");
        extend_reachable(graph, child, &mut reached);
        added.push(Edge::new(target, child.clone(), dependency));
    }
    added
}

/// Gives every node still unreachable an indirect edge from the root,
/// parentless nodes first so that one edge can recover a whole fragment.
pub(crate) fn reconnect(graph: &mut LevelGraph) -> Vec<Edge> {
    let mut reached = reachable_from_root(graph);
    let unreachable: Vec<NodeId> = graph
        .node_ids()
        .filter(|id| !reached.contains(*id))
        .cloned()
        .collect();
    let (sources, rest): (Vec<NodeId>, Vec<NodeId>) = unreachable
        .into_iter()
        .partition(|id| graph.parents(id).is_empty());

    let root = graph.root().clone();
    let mut added = Vec::new();
    for id in sources.into_iter().chain(rest) {
        if reached.contains(&id) {
            continue;
        }
        graph.set_edge(&root, &id, Dependency::Indirect).expect("endpoints exist");
        extend_reachable(graph, &id, &mut reached);
        added.push(Edge::new(root.clone(), id, Dependency::Indirect));
    }
    added
}
