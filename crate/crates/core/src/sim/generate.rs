use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::diff::{classify, diff_stats};
use crate::graph::{direct_subtree, validate, Dependency, LevelGraph, Node, NodeId, PropertyValue};
use crate::merge::MergePolicy;

use super::{apply_op, apply_script, EditOp, Scenario, SimError};

const KINDS: [&str; 6] = ["GameObject", "Transform", "Mesh", "Material", "Light", "Script"];
/// Kind of every node from the shared id pool, so that two branches adding
/// the same id never disagree on kind.
const SHARED_KIND: &str = "Prop";
const SHARED_POOL: usize = 3;

/// Relative frequency of each operation in generated scripts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OpWeights {
    pub add: u32,
    pub delete: u32,
    pub set_property: u32,
    pub remove_property: u32,
    pub reparent: u32,
    pub change_kind: u32,
    pub add_edge: u32,
    pub remove_edge: u32,
}

impl Default for OpWeights {
    fn default() -> Self {
        OpWeights {
            add: 3,
            delete: 2,
            set_property: 5,
            remove_property: 1,
            reparent: 2,
            change_kind: 1,
            add_edge: 2,
            remove_edge: 1,
        }
    }
}

impl OpWeights {
    fn table(&self) -> [(OpKind, u32); 8] {
        [
            (OpKind::Add, self.add),
            (OpKind::Delete, self.delete),
            (OpKind::Set, self.set_property),
            (OpKind::Remove, self.remove_property),
            (OpKind::Reparent, self.reparent),
            (OpKind::ChangeKind, self.change_kind),
            (OpKind::AddEdge, self.add_edge),
            (OpKind::RemoveEdge, self.remove_edge),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum OpKind {
    Add,
    Delete,
    Set,
    Remove,
    Reparent,
    ChangeKind,
    AddEdge,
    RemoveEdge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SizeParams {
    pub nodes: usize,
    pub edges: usize,
    pub ops_per_branch: usize,
    pub weights: OpWeights,
}

impl SizeParams {
    /// A base with roughly a quarter extra indirect edges on top of the
    /// spanning tree.
    pub fn small(nodes: usize, ops_per_branch: usize) -> Self {
        SizeParams {
            nodes,
            edges: nodes.saturating_sub(1) + nodes / 4,
            ops_per_branch,
            weights: OpWeights::default(),
        }
    }
}

/// Dimensions of one large merge: the base, the edited-node count of each
/// branch, and the expected size of the merge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScaleTargets {
    pub ancestor_nodes: usize,
    pub ancestor_edges: usize,
    pub diff_a: usize,
    pub diff_b: usize,
    pub merged_nodes: usize,
    pub merged_edges: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalePreset {
    Room,
    Planets,
    Lab,
    Vikings,
}

impl ScalePreset {
    pub const ALL: [ScalePreset; 4] = [ScalePreset::Room, ScalePreset::Planets, ScalePreset::Lab, ScalePreset::Vikings];

    pub fn name(self) -> &'static str {
        match self {
            ScalePreset::Room => "room",
            ScalePreset::Planets => "planets",
            ScalePreset::Lab => "lab",
            ScalePreset::Vikings => "vikings",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == text)
    }

    pub fn targets(self) -> ScaleTargets {
        let t = |ancestor_nodes, ancestor_edges, diff_a, diff_b, merged_nodes, merged_edges| ScaleTargets {
            ancestor_nodes,
            ancestor_edges,
            diff_a,
            diff_b,
            merged_nodes,
            merged_edges,
        };
        match self {
            ScalePreset::Room => t(79, 84, 168, 85, 244, 248),
            ScalePreset::Planets => t(2702, 3352, 545, 31, 2184, 2710),
            ScalePreset::Lab => t(2800, 3156, 131, 303, 3142, 3498),
            ScalePreset::Vikings => t(2249, 2318, 361, 467, 2384, 2452),
        }
    }
}

fn node_ids(count: usize) -> Vec<NodeId> {
    let width = count.saturating_sub(1).to_string().len().max(2);
    (0..count).map(|i| NodeId::from(format!("n{i:0width$}"))).collect()
}

fn random_value(rng: &mut ChaCha8Rng, key: &str) -> PropertyValue {
    match key {
        "x" => PropertyValue::Real([0.0, 1.0, 2.5][rng.gen_range(0..3)]),
        "color" => PropertyValue::Text(["red", "green", "blue"][rng.gen_range(0..3)].to_owned()),
        "on" => PropertyValue::Bool(rng.gen()),
        _ => PropertyValue::Int(rng.gen_range(0..3)),
    }
}

const KEYS: [&str; 4] = ["x", "color", "on", "count"];

fn random_properties(rng: &mut ChaCha8Rng) -> BTreeMap<String, PropertyValue> {
    let mut props = BTreeMap::new();
    for _ in 0..rng.gen_range(0..=2) {
        let key = KEYS[rng.gen_range(0..KEYS.len())];
        let value = random_value(rng, key);
        props.insert(key.to_owned(), value);
    }
    props
}

/// Random base level: a random recursive tree of direct edges plus
/// indirect edges from lower to higher ids.
fn base_graph(rng: &mut ChaCha8Rng, nodes: usize, edges: usize) -> Result<LevelGraph, SimError> {
    if nodes == 0 {
        return Err(SimError::Unsatisfiable("a level needs at least its root".into()));
    }
    let max_edges = nodes * (nodes - 1) / 2;
    if edges < nodes - 1 || edges > max_edges {
        return Err(SimError::Unsatisfiable(format!(
            "{edges} edges cannot connect {nodes} nodes acyclically (need {}..={max_edges})",
            nodes - 1
        )));
    }
    let ids = node_ids(nodes);
    let mut g = LevelGraph::new(Node::new(ids[0].clone(), "Scene"));
    for id in &ids[1..] {
        let mut node = Node::new(id.clone(), KINDS[rng.gen_range(0..KINDS.len())]);
        node.properties = random_properties(rng);
        g.add_node(node).expect("fresh id");
    }
    for j in 1..nodes {
        let p = rng.gen_range(0..j);
        g.add_edge(&ids[p], &ids[j], Dependency::Direct).expect("fresh edge");
    }
    let extra = edges - (nodes - 1);
    if extra * 2 > max_edges - (nodes - 1) {
        let mut free: Vec<(usize, usize)> = (0..nodes)
            .flat_map(|i| (i + 1..nodes).map(move |j| (i, j)))
            .filter(|&(i, j)| g.edge(&ids[i], &ids[j]).is_none())
            .collect();
        free.shuffle(rng);
        for (i, j) in free.into_iter().take(extra) {
            g.add_edge(&ids[i], &ids[j], Dependency::Indirect).expect("fresh edge");
        }
    } else {
        let mut added = 0;
        while added < extra {
            let i = rng.gen_range(0..nodes - 1);
            let j = rng.gen_range(i + 1..nodes);
            if g.edge(&ids[i], &ids[j]).is_none() {
                g.add_edge(&ids[i], &ids[j], Dependency::Indirect).expect("fresh edge");
                added += 1;
            }
        }
    }
    Ok(g)
}

fn pick<'a, T>(rng: &mut ChaCha8Rng, items: &'a [T]) -> Option<&'a T> {
    items.choose(rng)
}

fn propose(rng: &mut ChaCha8Rng, g: &LevelGraph, kind: OpKind, tag: char, next: &mut usize) -> Option<EditOp> {
    let all: Vec<NodeId> = g.node_ids().cloned().collect();
    let non_root: Vec<NodeId> = all.iter().filter(|id| *id != g.root()).cloned().collect();
    Some(match kind {
        OpKind::Add => {
            let (id, kind) = if rng.gen_bool(1.0 / 3.0) {
                (NodeId::from(format!("s{}", rng.gen_range(0..SHARED_POOL))), SHARED_KIND.to_owned())
            } else {
                *next += 1;
                (NodeId::from(format!("{tag}{}", *next)), KINDS[rng.gen_range(0..KINDS.len())].to_owned())
            };
            EditOp::AddNode {
                id,
                kind,
                parent: pick(rng, &all)?.clone(),
                properties: random_properties(rng),
            }
        }
        OpKind::Delete => EditOp::DeleteNode {
            id: pick(rng, &non_root)?.clone(),
        },
        OpKind::Set => {
            let id = pick(rng, &all)?.clone();
            if rng.gen_bool(0.15) {
                EditOp::SetProperty {
                    id,
                    key: "target".into(),
                    value: PropertyValue::Node(pick(rng, &all)?.clone()),
                }
            } else {
                let key = KEYS[rng.gen_range(0..KEYS.len())];
                EditOp::SetProperty {
                    id,
                    key: key.into(),
                    value: random_value(rng, key),
                }
            }
        }
        OpKind::Remove => {
            let with_props: Vec<&Node> = g.nodes().filter(|n| !n.properties.is_empty()).collect();
            let node = *pick(rng, &with_props)?;
            let keys: Vec<&String> = node.properties.keys().collect();
            EditOp::RemoveProperty {
                id: node.id.clone(),
                key: (*pick(rng, &keys)?).clone(),
            }
        }
        OpKind::Reparent => EditOp::Reparent {
            id: pick(rng, &non_root)?.clone(),
            new_parent: pick(rng, &all)?.clone(),
        },
        OpKind::ChangeKind => {
            let edges: Vec<_> = g.edges().collect();
            let e = pick(rng, &edges)?;
            EditOp::ChangeDepKind {
                parent: e.parent.clone(),
                child: e.child.clone(),
                dependency: match e.dependency {
                    Dependency::Direct => Dependency::Indirect,
                    Dependency::Indirect => Dependency::Direct,
                },
            }
        }
        OpKind::AddEdge => EditOp::AddIndirectEdge {
            parent: pick(rng, &all)?.clone(),
            child: pick(rng, &non_root)?.clone(),
        },
        OpKind::RemoveEdge => {
            let edges: Vec<_> = g.edges().filter(|e| e.dependency == Dependency::Indirect).collect();
            let e = pick(rng, &edges)?;
            EditOp::RemoveIndirectEdge {
                parent: e.parent.clone(),
                child: e.child.clone(),
            }
        }
    })
}

fn random_script(rng: &mut ChaCha8Rng, base: &LevelGraph, tag: char, ops: usize, weights: &OpWeights) -> Vec<EditOp> {
    let table = weights.table();
    let total: u32 = table.iter().map(|(_, w)| w).sum();
    let mut g = base.clone();
    let mut script = Vec::with_capacity(ops);
    let mut next = 0;
    let mut attempts = 0;
    while script.len() < ops && attempts < ops * 50 && total > 0 {
        attempts += 1;
        let mut roll = rng.gen_range(0..total);
        let kind = table
            .iter()
            .find(|(_, w)| {
                if roll < *w {
                    true
                } else {
                    roll -= w;
                    false
                }
            })
            .map(|(k, _)| *k)
            .expect("roll below total");
        let Some(op) = propose(rng, &g, kind, tag, &mut next) else { continue };
        let mut trial = g.clone();
        if apply_op(&mut trial, &op).is_ok() && validate(&trial).is_valid() {
            g = trial;
            script.push(op);
        }
    }
    script
}

/// A small random scenario; a deterministic function of `seed`.
pub fn generate(seed: u64, params: &SizeParams) -> Result<Scenario, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = base_graph(&mut rng, params.nodes, params.edges)?;
    let script_a = random_script(&mut rng, &base, 'a', params.ops_per_branch, &params.weights);
    let script_b = random_script(&mut rng, &base, 'b', params.ops_per_branch, &params.weights);
    Ok(Scenario {
        seed,
        base,
        script_a,
        script_b,
        policy: MergePolicy::default(),
    })
}

/// A large scenario with the given dimensions. Branches touch disjoint
/// leaves, so the merge is conflict-free and its size is predictable: the
/// change in node count is split between additions (or deletions) in
/// proportion to each branch's edit count, and the remaining edits are
/// property changes.
pub fn generate_scaled(seed: u64, targets: &ScaleTargets) -> Result<Scenario, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = base_graph(&mut rng, targets.ancestor_nodes, targets.ancestor_edges)?;

    let delta = targets.merged_nodes as i64 - targets.ancestor_nodes as i64;
    let total = (targets.diff_a + targets.diff_b) as i64;
    if total == 0 || delta.unsigned_abs() as i64 > total {
        return Err(SimError::Unsatisfiable(format!(
            "a node count change of {delta} needs more than {total} edits"
        )));
    }
    let share_a = ((delta.abs() * targets.diff_a as i64) as f64 / total as f64).round() as i64;
    let share_a = share_a.min(targets.diff_a as i64);
    let share_b = delta.abs() - share_a;
    if share_b > targets.diff_b as i64 {
        return Err(SimError::Unsatisfiable("diff sizes too small for the node count change".into()));
    }
    let (share_a, share_b) = (share_a as usize, share_b as usize);
    let (mods_a, mods_b) = (targets.diff_a - share_a, targets.diff_b - share_b);
    let deleting = delta < 0;

    let mut leaves: Vec<NodeId> = base
        .node_ids()
        .filter(|id| *id != base.root() && base.children(id).is_empty())
        .cloned()
        .collect();
    leaves.shuffle(&mut rng);
    let (del_a, del_b) = if deleting { (share_a, share_b) } else { (0, 0) };
    if leaves.len() < del_a + del_b {
        return Err(SimError::Unsatisfiable(format!(
            "{} leaf deletions needed, base has {} leaves",
            del_a + del_b,
            leaves.len()
        )));
    }
    let dels_b = leaves.split_off(leaves.len() - del_b);
    let dels_a = leaves.split_off(leaves.len() - del_a);
    let deleted: BTreeSet<&NodeId> = dels_a.iter().chain(&dels_b).collect();

    // A property change marks the node's whole direct subtree as edited, so
    // modification targets are picked by subtree size until the count is
    // exact. The branches write different keys and may overlap freely.
    let mut subtrees: Vec<(NodeId, BTreeSet<NodeId>)> = base
        .node_ids()
        .filter(|id| *id != base.root())
        .map(|id| (id.clone(), direct_subtree(&base, id).expect("node exists")))
        .filter(|(_, sub)| sub.iter().all(|n| !deleted.contains(n)))
        .collect();
    let mut pick_targets = |count: usize, rng: &mut ChaCha8Rng| -> Result<Vec<NodeId>, SimError> {
        for _ in 0..32 {
            subtrees.shuffle(rng);
            // Leaves last, to top up the remainder.
            subtrees.sort_by_key(|(_, sub)| sub.len() == 1);
            let (mut used, mut targets, mut left) = (BTreeSet::new(), Vec::new(), count);
            for (id, sub) in &subtrees {
                if sub.len() <= left && sub.is_disjoint(&used) {
                    used.extend(sub.iter().cloned());
                    targets.push(id.clone());
                    left -= sub.len();
                }
            }
            if left == 0 {
                return Ok(targets);
            }
        }
        Err(SimError::Unsatisfiable(format!("cannot cover exactly {count} modified nodes")))
    };
    let set_a = pick_targets(mods_a, &mut rng)?;
    let set_b = pick_targets(mods_b, &mut rng)?;
    let anchors: Vec<NodeId> = base.node_ids().filter(|id| !deleted.contains(id)).cloned().collect();

    let script = |tag: char, dels: &[NodeId], sets: &[NodeId], adds: usize, rng: &mut ChaCha8Rng| {
        let mut ops = Vec::new();
        for id in dels {
            ops.push(EditOp::DeleteNode { id: id.clone() });
        }
        for (k, id) in sets.iter().enumerate() {
            ops.push(EditOp::SetProperty {
                id: id.clone(),
                key: format!("revision_{tag}"),
                value: PropertyValue::Int(k as i64 + 1),
            });
        }
        for k in 0..adds {
            let mut properties = BTreeMap::new();
            properties.insert("name".to_owned(), PropertyValue::Text(format!("{tag}-{k}")));
            ops.push(EditOp::AddNode {
                id: NodeId::from(format!("{tag}{k:05}")),
                kind: KINDS[rng.gen_range(0..KINDS.len())].to_owned(),
                parent: anchors.choose(rng).expect("root is always an anchor").clone(),
                properties,
            });
        }
        ops
    };
    let (adds_a, adds_b) = if deleting { (0, 0) } else { (share_a, share_b) };
    let script_a = script('a', &dels_a, &set_a, adds_a, &mut rng);
    let script_b = script('b', &dels_b, &set_b, adds_b, &mut rng);

    let scenario = Scenario {
        seed,
        base,
        script_a,
        script_b,
        policy: MergePolicy::default(),
    };
    for (script, expected) in [(&scenario.script_a, targets.diff_a), (&scenario.script_b, targets.diff_b)] {
        let version = apply_script(&scenario.base, script)?;
        let diff = classify(&scenario.base, &version).expect("generated versions are valid");
        let edited = diff_stats(&diff).total_edited;
        if edited != expected {
            return Err(SimError::Unsatisfiable(format!("generated {edited} edited nodes, wanted {expected}")));
        }
    }
    Ok(scenario)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let params = SizeParams::small(10, 2);
        let (x, y) = (generate(7, &params).unwrap(), generate(7, &params).unwrap());
        assert_eq!(x.base, y.base);
        assert_eq!(x.script_a, y.script_a);
        assert_eq!(x.script_b, y.script_b);
        assert!(validate(&x.base).is_valid());
        assert_eq!(x.base.node_count(), 10);
        assert_eq!(x.base.edge_count(), params.edges);
        x.versions().unwrap();
    }

    #[test]
    fn zero_ops_gives_empty_scripts() {
        let s = generate(1, &SizeParams::small(6, 0)).unwrap();
        assert!(s.script_a.is_empty() && s.script_b.is_empty());
    }

    #[test]
    fn unsatisfiable_sizes() {
        let mut p = SizeParams::small(4, 1);
        p.edges = 2;
        assert!(matches!(generate(0, &p), Err(SimError::Unsatisfiable(_))));
        p.edges = 7;
        assert!(matches!(generate(0, &p), Err(SimError::Unsatisfiable(_))));
        p.edges = 6;
        assert_eq!(generate(0, &p).unwrap().base.edge_count(), 6);
    }

    #[test]
    fn presets_hit_their_dimensions() {
        for preset in ScalePreset::ALL {
            let t = preset.targets();
            let s = generate_scaled(3, &t).unwrap();
            assert_eq!(s.base.node_count(), t.ancestor_nodes);
            assert_eq!(s.base.edge_count(), t.ancestor_edges);
        }
    }
}
