use crate::graph::algo::Indexed;
use crate::graph::{Dependency, Edge, LevelGraph};

/// Breaks every cycle by removing one edge at a time. Each round takes the
/// cyclic component with the smallest member id and removes one of its
/// internal edges: indirect edges are preferred, then the lowest source
/// height, then the smallest `(parent, child)`. Returns the repaired graph
/// and the removed edges in removal order.
pub fn repair_cycles(graph: &LevelGraph) -> (LevelGraph, Vec<Edge>) {
    let mut graph = graph.clone();
    let mut removed = Vec::new();
    loop {
        let index = Indexed::new(&graph);
        let components = index.tarjan();
        // Node indices follow id order, so the smallest index is the
        // smallest id.
        let Some(component) = components
            .into_iter()
            .filter(|c| c.len() > 1)
            .min_by_key(|c| c.iter().copied().min())
        else {
            break;
        };
        let heights = index.heights();
        let mut member = vec![false; index.ids.len()];
        for &v in &component {
            member[v] = true;
        }
        let internal: Vec<(usize, usize, Dependency)> = component
            .iter()
            .flat_map(|&v| index.out[v].iter().map(move |&(w, d)| (v, w, d)))
            .filter(|&(_, w, _)| member[w])
            .collect();
        let any_indirect = internal.iter().any(|e| e.2 == Dependency::Indirect);
        let &(v, w, dep) = internal
            .iter()
            .filter(|e| !any_indirect || e.2 == Dependency::Indirect)
            .min_by_key(|&&(v, w, _)| (heights[v], index.ids[v], index.ids[w]))
            .expect("a cyclic component has internal edges");
        let edge = Edge::new(index.ids[v].clone(), index.ids[w].clone(), dep);
        drop(index);
        graph.remove_edge(&edge.parent, &edge.child);
        removed.push(edge);
    }
    (graph, removed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{validate, Node, NodeId};
    use Dependency::{Direct, Indirect};

    fn graph(edges: &[(&str, &str, Dependency)]) -> LevelGraph {
        let mut g = LevelGraph::new(Node::new("root", "Scene"));
        for (p, c, d) in edges {
            for id in [p, c] {
                let id = NodeId::from(*id);
                if !g.contains(&id) {
                    g.add_node(Node::new(id, "GameObject")).unwrap();
                }
            }
            g.add_edge(&(*p).into(), &(*c).into(), *d).unwrap();
        }
        g
    }

    #[test]
    fn acyclic_input_is_untouched() {
        let g = graph(&[("root", "a", Direct), ("a", "b", Indirect)]);
        let (out, removed) = repair_cycles(&g);
        assert_eq!(out, g);
        assert!(removed.is_empty());
    }

    #[test]
    fn indirect_edge_goes_first() {
        let g = graph(&[("root", "A", Direct), ("A", "B", Direct), ("B", "A", Indirect)]);
        let (out, removed) = repair_cycles(&g);
        assert_eq!(removed, vec![Edge::new("B", "A", Indirect)]);
        assert!(validate(&out).is_valid());
    }

    #[test]
    fn all_direct_cycle_breaks_smallest_pair() {
        let g = graph(&[("root", "x", Direct), ("x", "y", Direct), ("y", "x", Direct)]);
        let (out, removed) = repair_cycles(&g);
        assert_eq!(removed, vec![Edge::new("x", "y", Direct)]);
        assert!(crate::graph::topological_order(&out).is_some());
    }

    #[test]
    fn disjoint_cycles_each_lose_one_edge() {
        let g = graph(&[
            ("root", "a", Direct),
            ("a", "b", Direct),
            ("b", "a", Direct),
            ("root", "c", Direct),
            ("c", "d", Direct),
            ("d", "e", Indirect),
            ("e", "c", Direct),
        ]);
        let (out, removed) = repair_cycles(&g);
        assert!(crate::graph::topological_order(&out).is_some());
        assert_eq!(removed, vec![Edge::new("a", "b", Direct), Edge::new("d", "e", Indirect)]);
    }
}
