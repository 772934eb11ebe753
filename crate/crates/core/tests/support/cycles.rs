//! Merges engineered to close cycles, and an independent audit of the
//! repair.

#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use levelmerge::graph::{has_path, strongly_connected_components, topological_order, validate};
use levelmerge::sim::{apply_op, generate, EditOp, Scenario, SizeParams};
use levelmerge::{merge3, Dependency, Edge, LevelGraph, MergeOutcome, MergePolicy, Node, NodeId, PropertyValue};

/// Pairs of unrelated nodes get opposite edges in the two branches, either
/// as new indirect edges or as reparents.
pub fn cyclic_scenario(seed: u64) -> Option<Scenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = SizeParams { ops_per_branch: 0, ..SizeParams::small(rng.gen_range(5..=14), 0) };
    let mut s = generate(seed, &params).ok()?;
    let ids: Vec<NodeId> = s.base.node_ids().filter(|n| *n != s.base.root()).cloned().collect();
    let (mut a, mut b) = (s.base.clone(), s.base.clone());
    for _ in 0..rng.gen_range(1..=3) {
        let (u, v) = {
            let pair: Vec<&NodeId> = ids.choose_multiple(&mut rng, 2).collect();
            (pair[0].clone(), pair[1].clone())
        };
        if has_path(&s.base, &u, &v) || has_path(&s.base, &v, &u) {
            continue;
        }
        let forward = |p: &NodeId, c: &NodeId, rng: &mut ChaCha8Rng| {
            if rng.gen_bool(0.5) {
                EditOp::AddIndirectEdge { parent: p.clone(), child: c.clone() }
            } else {
                EditOp::Reparent { id: c.clone(), new_parent: p.clone() }
            }
        };
        for (g, script, op) in [
            (&mut a, &mut s.script_a, forward(&u, &v, &mut rng)),
            (&mut b, &mut s.script_b, forward(&v, &u, &mut rng)),
        ] {
            let mut trial = g.clone();
            if apply_op(&mut trial, &op).is_ok() && validate(&trial).is_valid() {
                *g = trial;
                script.push(op);
            }
        }
    }
    Some(s)
}

/// Replays the removals on the pre-repair graph and checks each one: the
/// edge lies on a cycle, and it is direct only when its cycle has no
/// indirect edge. Returns a description of the first breach.
pub fn audit(out: &MergeOutcome) -> Result<(), String> {
    if topological_order(&out.merged).is_none() {
        return Err("merged level is cyclic".into());
    }
    let mut g = out.merged.clone();
    for e in &out.reconnected {
        g.remove_edge(&e.parent, &e.child);
    }
    for e in &out.removed_cycle_edges {
        g.set_edge(&e.parent, &e.child, e.dependency).map_err(|x| x.to_string())?;
    }
    for e in &out.removed_cycle_edges {
        if g.edge(&e.parent, &e.child) != Some(e.dependency) {
            return Err(format!("{e} was not in the merged graph"));
        }
        let scc = strongly_connected_components(&g)
            .into_iter()
            .find(|c| c.contains(&e.parent))
            .unwrap_or_default();
        if !scc.contains(&e.child) {
            return Err(format!("{e} is not on a cycle"));
        }
        if e.dependency == Dependency::Direct {
            let indirect = scc.iter().any(|p| {
                g.children(p)
                    .iter()
                    .any(|(c, d)| *d == Dependency::Indirect && scc.contains(c))
            });
            if indirect {
                return Err(format!("{e} removed although its cycle has an indirect edge"));
            }
        }
        g.remove_edge(&e.parent, &e.child);
    }
    if topological_order(&g).is_none() {
        return Err("removals leave a cycle".into());
    }
    Ok(())
}

/// Renames every id with an order-preserving prefix.
pub fn relabel(g: &LevelGraph) -> LevelGraph {
    let map = |id: &NodeId| NodeId::from(format!("q_{id}"));
    let root = g.node(g.root()).unwrap();
    let copy = |n: &Node| {
        let mut m = Node::new(map(&n.id), n.kind.clone());
        for (k, v) in &n.properties {
            let v = match v {
                PropertyValue::Node(t) => PropertyValue::Node(map(t)),
                other => other.clone(),
            };
            m.properties.insert(k.clone(), v);
        }
        m
    };
    let mut out = LevelGraph::new(copy(root));
    for n in g.nodes().filter(|n| n.id != root.id) {
        out.add_node(copy(n)).unwrap();
    }
    for Edge { parent, child, dependency } in g.edges() {
        out.add_edge(&map(&parent), &map(&child), dependency).unwrap();
    }
    out.set_manifest(g.assets().clone());
    out
}

/// Merges `s` and checks the repair, plus determinism under relabeling.
/// `Ok(true)` when at least one edge had to be removed.
pub fn check_cycle_merge(s: &Scenario, policy: &MergePolicy) -> Result<bool, String> {
    let (a, b) = s.versions().map_err(|e| e.to_string())?;
    let out = merge3(&s.base, &a, &b, policy).map_err(|e| e.to_string())?;
    audit(&out)?;
    let renamed = merge3(&relabel(&s.base), &relabel(&a), &relabel(&b), policy).map_err(|e| e.to_string())?;
    if renamed.merged != relabel(&out.merged) {
        return Err("relabeled merge differs".into());
    }
    let names = |v: &[Edge]| v.iter().map(|e| format!("q_{}>q_{}", e.parent, e.child)).collect::<Vec<_>>();
    let renamed_names: Vec<String> = renamed
        .removed_cycle_edges
        .iter()
        .map(|e| format!("{}>{}", e.parent, e.child))
        .collect();
    if renamed_names != names(&out.removed_cycle_edges) {
        return Err("relabeled merge removed different edges".into());
    }
    Ok(!out.removed_cycle_edges.is_empty())
}
