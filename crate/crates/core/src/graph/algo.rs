//! Structural queries over a [`LevelGraph`]. Everything here tolerates
//! cyclic graphs, since merging can produce cycles before repair.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use super::{Dependency, GraphError, LevelGraph, NodeId};

/// Dense index over a graph: node ids in sorted order and adjacency lists.
pub(crate) struct Indexed<'g> {
    pub ids: Vec<&'g NodeId>,
    pub pos: HashMap<&'g NodeId, usize>,
    pub out: Vec<Vec<(usize, Dependency)>>,
}

impl<'g> Indexed<'g> {
    pub fn new(graph: &'g LevelGraph) -> Self {
        let ids: Vec<&NodeId> = graph.node_ids().collect();
        let pos: HashMap<&NodeId, usize> = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
        let out = ids
            .iter()
            .map(|id| {
                graph
                    .children(id)
                    .iter()
                    .map(|(child, dep)| (pos[child], *dep))
                    .collect()
            })
            .collect();
        Indexed { ids, pos, out }
    }

    pub fn reachable(&self, start: usize) -> Vec<bool> {
        let mut seen = vec![false; self.ids.len()];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(v) = queue.pop_front() {
            for &(w, _) in &self.out[v] {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        seen
    }

    /// Tarjan's algorithm, iterative. Components come out in reverse
    /// topological order of the condensation.
    pub fn tarjan(&self) -> Vec<Vec<usize>> {
        const UNSEEN: usize = usize::MAX;
        let n = self.ids.len();
        let mut index = vec![UNSEEN; n];
        let mut low = vec![0; n];
        let mut on_stack = vec![false; n];
        let mut stack = Vec::new();
        let mut components = Vec::new();
        let mut next = 0;
        let mut frames: Vec<(usize, usize)> = Vec::new();

        for start in 0..n {
            if index[start] != UNSEEN {
                continue;
            }
            index[start] = next;
            low[start] = next;
            next += 1;
            stack.push(start);
            on_stack[start] = true;
            frames.push((start, 0));

            while let Some(frame) = frames.last_mut() {
                let v = frame.0;
                if frame.1 < self.out[v].len() {
                    let w = self.out[v][frame.1].0;
                    frame.1 += 1;
                    if index[w] == UNSEEN {
                        index[w] = next;
                        low[w] = next;
                        next += 1;
                        stack.push(w);
                        on_stack[w] = true;
                        frames.push((w, 0));
                    } else if on_stack[w] {
                        low[v] = low[v].min(index[w]);
                    }
                    continue;
                }
                frames.pop();
                if let Some(&(u, _)) = frames.last() {
                    low[u] = low[u].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut component = Vec::new();
                    loop {
                        let w = stack.pop().expect("tarjan stack underflow");
                        on_stack[w] = false;
                        component.push(w);
                        if w == v {
                            break;
                        }
                    }
                    components.push(component);
                }
            }
        }
        components
    }

    /// Longest-path height of every node over the condensation. Components
    /// without incoming edges start at zero; in a valid graph that is only
    /// the root's component.
    pub fn heights(&self) -> Vec<usize> {
        let components = self.tarjan();
        let mut comp_of = vec![0; self.ids.len()];
        for (c, members) in components.iter().enumerate() {
            for &v in members {
                comp_of[v] = c;
            }
        }
        let mut comp_height = vec![0usize; components.len()];
        // Reverse Tarjan order is a topological order of the condensation.
        for c in (0..components.len()).rev() {
            let h = comp_height[c];
            for &v in &components[c] {
                for &(w, _) in &self.out[v] {
                    let d = comp_of[w];
                    if d != c && comp_height[d] < h + 1 {
                        comp_height[d] = h + 1;
                    }
                }
            }
        }
        comp_of.iter().map(|&c| comp_height[c]).collect()
    }
}

/// Nodes reachable from the scene root over edges of either kind.
pub fn reachable_from_root(graph: &LevelGraph) -> BTreeSet<NodeId> {
    let index = Indexed::new(graph);
    let seen = index.reachable(index.pos[graph.root()]);
    index
        .ids
        .iter()
        .zip(seen)
        .filter(|(_, s)| *s)
        .map(|(id, _)| (*id).clone())
        .collect()
}

/// Whether a directed path (of length zero or more) leads from `from` to `to`.
pub fn has_path(graph: &LevelGraph, from: &NodeId, to: &NodeId) -> bool {
    if from == to {
        return true;
    }
    let mut seen = BTreeSet::from([from]);
    let mut stack = vec![from];
    while let Some(v) = stack.pop() {
        for child in graph.children(v).keys() {
            if child == to {
                return true;
            }
            if seen.insert(child) {
                stack.push(child);
            }
        }
    }
    false
}

/// All strongly connected components, each sorted, ordered by their smallest
/// member. Singletons are included.
pub fn strongly_connected_components(graph: &LevelGraph) -> Vec<Vec<NodeId>> {
    let index = Indexed::new(graph);
    let mut components: Vec<Vec<NodeId>> = index
        .tarjan()
        .into_iter()
        .map(|members| {
            let mut ids: Vec<NodeId> = members.into_iter().map(|v| index.ids[v].clone()).collect();
            ids.sort();
            ids
        })
        .collect();
    components.sort();
    components
}

/// A topological order (ties broken by id), or `None` if the graph has a
/// cycle.
pub fn topological_order(graph: &LevelGraph) -> Option<Vec<NodeId>> {
    let mut indegree: BTreeMap<&NodeId, usize> =
        graph.node_ids().map(|id| (id, graph.parents(id).len())).collect();
    let mut ready: BTreeSet<&NodeId> = indegree
        .iter()
        .filter(|(_, d)| **d == 0)
        .map(|(id, _)| *id)
        .collect();
    let mut order = Vec::with_capacity(indegree.len());
    while let Some(id) = ready.pop_first() {
        order.push(id.clone());
        for child in graph.children(id).keys() {
            let d = indegree.get_mut(child).expect("child is a node");
            *d -= 1;
            if *d == 0 {
                ready.insert(child);
            }
        }
    }
    (order.len() == graph.node_count()).then_some(order)
}

/// Heights of all nodes, see [`height`].
pub fn heights(graph: &LevelGraph) -> BTreeMap<NodeId, usize> {
    let index = Indexed::new(graph);
    index
        .ids
        .iter()
        .zip(index.heights())
        .map(|(id, h)| ((*id).clone(), h))
        .collect()
}

/// Length of the longest directed path from the root to `id`, computed on
/// the condensation so that members of a cycle share one height.
pub fn height(graph: &LevelGraph, id: &NodeId) -> Result<usize, GraphError> {
    if !graph.contains(id) {
        return Err(GraphError::UnknownNode(id.clone()));
    }
    let index = Indexed::new(graph);
    Ok(index.heights()[index.pos[id]])
}

/// The node plus everything reachable from it over direct edges only.
pub fn direct_subtree(graph: &LevelGraph, id: &NodeId) -> Result<BTreeSet<NodeId>, GraphError> {
    if !graph.contains(id) {
        return Err(GraphError::UnknownNode(id.clone()));
    }
    let mut seen = BTreeSet::from([id.clone()]);
    let mut stack = vec![id];
    while let Some(v) = stack.pop() {
        for (child, dep) in graph.children(v) {
            if *dep == Dependency::Direct && seen.insert(child.clone()) {
                stack.push(child);
            }
        }
    }
    Ok(seen)
}
