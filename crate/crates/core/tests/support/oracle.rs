//! Reference conflict detector and the exhaustive single-op sweep.
//!
//! The detector restates the conflict rules directly over node states
//! (kind, properties, incoming edges) without going through the engine's
//! diff or merge code.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use levelmerge::graph::validate;
use levelmerge::merge::ConflictSignature;
use levelmerge::sim::{apply_op, ConflictOracle, EditOp};
use levelmerge::{Dependency, LevelGraph, Node, NodeId, PropertyValue};

type Props = BTreeMap<String, PropertyValue>;
type Parents = BTreeMap<NodeId, Dependency>;

#[derive(PartialEq)]
struct State {
    kind: String,
    props: Props,
    parents: Parents,
}

fn state(g: &LevelGraph, id: &NodeId) -> Option<State> {
    let node = g.node(id)?;
    Some(State {
        kind: node.kind.clone(),
        props: node.properties.clone(),
        parents: g.parents(id).clone(),
    })
}

/// Both sides changed a slot, to different values.
fn clash<T: PartialEq>(o: Option<&T>, a: Option<&T>, b: Option<&T>) -> bool {
    a != o && b != o && a != b
}

fn sig(tag: &'static str, subject: &NodeId, detail: &str) -> ConflictSignature {
    ConflictSignature {
        tag,
        subject: subject.to_string(),
        detail: detail.to_owned(),
    }
}

/// Nodes reachable from `start` along direct edges, `start` included.
fn direct_closure(g: &LevelGraph, start: &[NodeId]) -> BTreeSet<NodeId> {
    let mut out: BTreeSet<NodeId> = start.iter().filter(|n| g.contains(n)).cloned().collect();
    let mut todo: Vec<NodeId> = out.iter().cloned().collect();
    while let Some(v) = todo.pop() {
        for (c, d) in g.children(&v) {
            if *d == Dependency::Direct && out.insert(c.clone()) {
                todo.push(c.clone());
            }
        }
    }
    out
}

pub struct BruteForceOracle;

impl BruteForceOracle {
    fn same_node(&self, o: &LevelGraph, a: &LevelGraph, b: &LevelGraph, out: &mut BTreeSet<ConflictSignature>) {
        for n in a.node_ids() {
            let (Some(sa), Some(sb)) = (state(a, n), state(b, n)) else { continue };
            let so = state(o, n);
            let empty_props = Props::new();
            let empty_parents = Parents::new();
            let op = so.as_ref().map_or(&empty_props, |s| &s.props);
            let keys: BTreeSet<&String> = sa.props.keys().chain(sb.props.keys()).collect();
            for k in keys {
                if clash(op.get(k), sa.props.get(k), sb.props.get(k)) {
                    let tag = if so.is_some() { "property" } else { "add-add" };
                    out.insert(sig(tag, n, k));
                }
            }
            let oe = so.as_ref().map_or(&empty_parents, |s| &s.parents);
            let slots: BTreeSet<&NodeId> = oe.keys().chain(sa.parents.keys()).chain(sb.parents.keys()).collect();
            let mut directs = 0;
            let mut split = false;
            for p in slots {
                let (x, y, z) = (oe.get(p), sa.parents.get(p), sb.parents.get(p));
                if clash(x, y, z) {
                    split = true;
                }
                let merged = if y != x { y } else { z };
                if merged == Some(&Dependency::Direct) {
                    directs += 1;
                }
            }
            if split || directs > 1 {
                out.insert(sig("reparent", n, ""));
            }
        }
    }

    fn deletions(&self, o: &LevelGraph, x: &LevelGraph, y: &LevelGraph, label: &str, out: &mut BTreeSet<ConflictSignature>) {
        let gone: BTreeSet<NodeId> = o.node_ids().filter(|n| !x.contains(n) && y.contains(n)).cloned().collect();
        for r in &gone {
            if o.direct_parent(r).is_some_and(|p| gone.contains(p)) {
                continue;
            }
            // Members: deleted nodes whose ancestor direct-parent chain stays
            // inside the deleted set up to r.
            let group: BTreeSet<NodeId> = gone
                .iter()
                .filter(|n| {
                    let mut cur = (*n).clone();
                    loop {
                        if &cur == r {
                            return true;
                        }
                        match o.direct_parent(&cur) {
                            Some(p) if gone.contains(p) => cur = p.clone(),
                            _ => return false,
                        }
                    }
                })
                .cloned()
                .collect();
            let mut candidates = direct_closure(o, std::slice::from_ref(r));
            candidates.extend(direct_closure(y, &group.iter().cloned().collect::<Vec<_>>()));
            for p in &group {
                for t in y.children(p).keys().chain(o.children(p).keys()) {
                    if y.parents(t).get(p) != o.parents(t).get(p) {
                        candidates.insert(t.clone());
                    }
                }
            }
            for n in y.nodes() {
                for (k, v) in &n.properties {
                    let new = o.node(&n.id).and_then(|m| m.properties.get(k)) != Some(v);
                    if new && matches!(v, PropertyValue::Node(t) if group.contains(t)) {
                        candidates.insert(n.id.clone());
                    }
                }
            }
            let touched = candidates.iter().any(|t| match state(y, t) {
                None => false,
                Some(s) => Some(&s) != state(o, t).as_ref() && Some(&s) != state(x, t).as_ref(),
            });
            if touched {
                out.insert(sig("delete-modify", r, label));
            }
        }
    }
}

impl ConflictOracle for BruteForceOracle {
    fn conflicts(&self, o: &LevelGraph, a: &LevelGraph, b: &LevelGraph) -> BTreeSet<ConflictSignature> {
        let mut out = BTreeSet::new();
        self.same_node(o, a, b, &mut out);
        self.deletions(o, a, b, "a", &mut out);
        self.deletions(o, b, a, "b", &mut out);
        out
    }
}

/// r -> a -> b, r -> c -> d (direct), b -> d (indirect); a few properties,
/// one of them a node reference.
pub fn sweep_base() -> LevelGraph {
    let mut g = LevelGraph::new(Node::new("r", "Scene"));
    for (id, kind) in [("a", "GameObject"), ("b", "Mesh"), ("c", "Light"), ("d", "Script")] {
        g.add_node(Node::new(id, kind)).unwrap();
    }
    for (p, c, d) in [
        ("r", "a", Dependency::Direct),
        ("a", "b", Dependency::Direct),
        ("r", "c", Dependency::Direct),
        ("c", "d", Dependency::Direct),
        ("b", "d", Dependency::Indirect),
    ] {
        g.add_edge(&p.into(), &c.into(), d).unwrap();
    }
    g.set_property(&"a".into(), "x", PropertyValue::Real(1.0)).unwrap();
    g.set_property(&"b".into(), "color", PropertyValue::Text("red".into())).unwrap();
    g.set_property(&"c".into(), "target", PropertyValue::Node("b".into())).unwrap();
    g
}

/// Every single operation applicable to `base` that yields a valid level.
/// `tag` names the branch's private additions; id `s` is shared.
pub fn op_menu(base: &LevelGraph, tag: &str) -> Vec<EditOp> {
    let ids: Vec<NodeId> = base.node_ids().cloned().collect();
    let mut ops = Vec::new();
    for p in &ids {
        for color in [None, Some("red"), Some("blue")] {
            let mut properties = BTreeMap::new();
            if let Some(c) = color {
                properties.insert("color".to_owned(), PropertyValue::Text(c.into()));
            }
            ops.push(EditOp::AddNode { id: "s".into(), kind: "Prop".into(), parent: p.clone(), properties });
        }
        ops.push(EditOp::AddNode {
            id: NodeId::from(format!("{tag}1")),
            kind: "GameObject".into(),
            parent: p.clone(),
            properties: BTreeMap::new(),
        });
    }
    for n in &ids {
        ops.push(EditOp::DeleteNode { id: n.clone() });
        for value in [
            ("x", PropertyValue::Real(2.0)),
            ("x", PropertyValue::Real(3.0)),
            ("color", PropertyValue::Text("red".into())),
            ("color", PropertyValue::Text("blue".into())),
            ("target", PropertyValue::Node("b".into())),
            ("target", PropertyValue::Node("d".into())),
        ] {
            ops.push(EditOp::SetProperty { id: n.clone(), key: value.0.into(), value: value.1 });
        }
        for key in ["x", "color", "target"] {
            ops.push(EditOp::RemoveProperty { id: n.clone(), key: key.into() });
        }
        for p in &ids {
            ops.push(EditOp::Reparent { id: n.clone(), new_parent: p.clone() });
            ops.push(EditOp::AddIndirectEdge { parent: p.clone(), child: n.clone() });
            ops.push(EditOp::RemoveIndirectEdge { parent: p.clone(), child: n.clone() });
            for dependency in [Dependency::Direct, Dependency::Indirect] {
                ops.push(EditOp::ChangeDepKind { parent: p.clone(), child: n.clone(), dependency });
            }
        }
    }
    ops.retain(|op| {
        let mut g = base.clone();
        apply_op(&mut g, op).is_ok() && validate(&g).is_valid() && g != *base
    });
    ops
}
