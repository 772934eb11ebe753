use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use crate::assets::{merge_manifests, AssetMerger, BlobStore};
use crate::diff::{classify, diff_stats, ChangeClass, DiffResult};
use crate::graph::{direct_subtree, Dependency, LevelGraph, NodeId, PropertyValue};

use super::finalize;
use super::node::{detect, settle, states_of, Holds, NodeState};
use super::{
    Branch, Conflict, ConflictKind, ConflictResolution, DroppedChange, DroppedEdit, MergeError,
    MergeOutcome, MergePolicy, MergeStats,
};

type States = BTreeMap<NodeId, NodeState>;

/// One merge in progress. The phase methods must be called in pipeline
/// order: [`apply_additions`](Self::apply_additions),
/// [`apply_deletions`](Self::apply_deletions),
/// [`apply_modifications`](Self::apply_modifications),
/// [`resolve_conflicts`](Self::resolve_conflicts), then
/// [`finish`](Self::finish).
pub struct MergeSession<'g> {
    ancestor: &'g LevelGraph,
    versions: [&'g LevelGraph; 2],
    diffs: [DiffResult; 2],
    base: States,
    sides: [States; 2],
    policy: MergePolicy,
    working: States,
    holds: [Holds; 2],
    conflicts: Vec<Conflict>,
    dropped: Vec<DroppedEdit>,
    started: Instant,
}

impl<'g> MergeSession<'g> {
    /// Diffs both branches and initializes the working copy from the
    /// ancestor.
    pub fn new(
        ancestor: &'g LevelGraph,
        mine: &'g LevelGraph,
        theirs: &'g LevelGraph,
        policy: MergePolicy,
    ) -> Result<Self, MergeError> {
        let started = Instant::now();
        let diffs = [classify(ancestor, mine)?, classify(ancestor, theirs)?];
        let base = states_of(ancestor);
        let sides = [states_of(mine), states_of(theirs)];
        for (id, a) in &sides[0] {
            if let Some(b) = sides[1].get(id) {
                if a.kind != b.kind {
                    return Err(MergeError::KindMismatch {
                        node: id.clone(),
                        a: a.kind.clone(),
                        b: b.kind.clone(),
                    });
                }
            }
        }
        Ok(MergeSession {
            ancestor,
            versions: [mine, theirs],
            diffs,
            working: base.clone(),
            base,
            sides,
            policy,
            holds: Default::default(),
            conflicts: Vec::new(),
            dropped: Vec::new(),
            started,
        })
    }

    /// Replaces the working copy, for driving single phases against a
    /// prepared state.
    pub fn with_working(mut self, working: &LevelGraph) -> Self {
        self.working = states_of(working);
        self
    }

    pub fn diff(&self, branch: Branch) -> &DiffResult {
        &self.diffs[branch.index()]
    }

    pub fn conflicts(&self) -> &[Conflict] {
        &self.conflicts
    }

    pub fn dropped(&self) -> &[DroppedEdit] {
        &self.dropped
    }

    /// The working copy as a graph. Edges to nodes that are not (or no
    /// longer) present are left out, and no repair is attempted, so the
    /// result may be cyclic or disconnected.
    pub fn working_graph(&self) -> LevelGraph {
        finalize::build(self.ancestor.root(), &self.working).0
    }

    fn side(&self, branch: Branch, id: &NodeId) -> Option<&NodeState> {
        self.sides[branch.index()].get(id)
    }

    fn settle(&self, id: &NodeId) -> Option<NodeState> {
        settle(
            id,
            self.base.get(id),
            self.side(Branch::A, id),
            self.side(Branch::B, id),
            &self.holds,
            &self.policy,
        )
    }

    fn resettle<'i>(&mut self, ids: impl IntoIterator<Item = &'i NodeId>) {
        for id in ids {
            match self.settle(id) {
                Some(state) => self.working.insert(id.clone(), state),
                None => self.working.remove(id),
            };
        }
    }

    /// Stores new conflicts, holding their items on both branches until
    /// resolution.
    fn record(&mut self, kinds: Vec<ConflictKind>) -> Vec<Conflict> {
        let found: Vec<Conflict> = kinds.into_iter().map(Conflict::new).collect();
        for c in &found {
            for branch in [Branch::A, Branch::B] {
                self.holds[branch.index()].hold(&c.kind, branch);
            }
        }
        self.conflicts.extend(found.iter().cloned());
        found
    }

    fn class_set(&self, branch: Branch, class: ChangeClass) -> BTreeSet<NodeId> {
        self.diffs[branch.index()].nodes_in(class).cloned().collect()
    }

    /// Inserts every node added by either branch. Same-id additions are
    /// merged key by key; a node whose direct parent is missing from the
    /// working copy hangs directly under the root.
    pub fn apply_additions(&mut self) -> Vec<Conflict> {
        let mut added = self.class_set(Branch::A, ChangeClass::Added);
        added.extend(self.class_set(Branch::B, ChangeClass::Added));

        let mut kinds = Vec::new();
        for id in &added {
            if let (Some(a), Some(b)) = (self.side(Branch::A, id), self.side(Branch::B, id)) {
                kinds.extend(detect(id, None, a, b, &self.policy));
            }
        }
        let found = self.record(kinds);

        let root = self.ancestor.root().clone();
        for id in &added {
            let Some(mut state) = self.settle(id) else { continue };
            let missing: Vec<(NodeId, Dependency)> = state
                .parents
                .iter()
                .filter(|(p, _)| !self.working.contains_key(*p) && !added.contains(*p))
                .map(|(p, d)| (p.clone(), *d))
                .collect();
            for (parent, dep) in missing {
                state.parents.remove(&parent);
                if dep == Dependency::Direct {
                    state.parents.insert(root.clone(), Dependency::Direct);
                }
            }
            self.working.insert(id.clone(), state);
        }
        found
    }

    /// Removes nodes deleted by either branch. A deletion whose group
    /// (the deleted nodes hanging together by direct edges) overlaps the
    /// other branch's edits becomes a delete/modify conflict instead.
    pub fn apply_deletions(&mut self) -> Vec<Conflict> {
        let mut kinds = Vec::new();
        let mut all_deleted = BTreeSet::new();
        for x in [Branch::A, Branch::B] {
            let deleted = self.class_set(x, ChangeClass::Deleted);
            let theirs = self.class_set(x.other(), ChangeClass::Deleted);
            let only: BTreeSet<NodeId> = deleted.difference(&theirs).cloned().collect();
            for (root, group) in deletion_groups(self.ancestor, &only) {
                let touched = self.touched(x, &root, &group);
                if !touched.is_empty() {
                    kinds.push(ConflictKind::DeleteModify {
                        deleting: x,
                        deleted: root,
                        group: group.into_iter().collect(),
                        touched: touched.into_iter().collect(),
                    });
                }
            }
            all_deleted.extend(deleted);
        }
        let found = self.record(kinds);

        let mut affected = all_deleted;
        for c in &found {
            if let ConflictKind::DeleteModify { touched, .. } = &c.kind {
                affected.extend(touched.iter().cloned());
            }
        }
        self.resettle(&affected);
        found
    }

    /// Nodes the non-deleting branch edited in a way that the deletion of
    /// `group` (rooted at `root`) by `x` would lose: edits inside the
    /// ancestor's direct subtree of `root`, content the other branch placed
    /// under the group, edges out of the group it changed, and references
    /// into the group it set.
    fn touched(&self, x: Branch, root: &NodeId, group: &BTreeSet<NodeId>) -> BTreeSet<NodeId> {
        let y = x.other();
        let ours = self.versions[y.index()];
        let mut candidates = direct_subtree(self.ancestor, root).unwrap_or_default();

        let mut stack: Vec<&NodeId> = group.iter().filter(|g| ours.contains(g)).collect();
        let mut seen: BTreeSet<&NodeId> = stack.iter().copied().collect();
        while let Some(v) = stack.pop() {
            for (child, dep) in ours.children(v) {
                if *dep == Dependency::Direct && seen.insert(child) {
                    stack.push(child);
                }
            }
        }
        candidates.extend(seen.into_iter().cloned());

        for p in group {
            for t in ours.children(p).keys().chain(self.ancestor.children(p).keys()) {
                if ours.parents(t).get(p) != self.ancestor.parents(t).get(p) {
                    candidates.insert(t.clone());
                }
            }
        }

        for (t, delta) in &self.diffs[y.index()].deltas {
            let refers = delta
                .property_sets
                .values()
                .any(|v| matches!(v, PropertyValue::Node(target) if group.contains(target)));
            if refers {
                candidates.insert(t.clone());
            }
        }

        candidates
            .into_iter()
            .filter(|t| match self.side(y, t) {
                None => false,
                Some(state) => Some(state) != self.base.get(t) && Some(state) != self.side(x, t),
            })
            .collect()
    }

    /// Merges property, edge and parent changes of every surviving ancestor
    /// node.
    pub fn apply_modifications(&mut self) -> Vec<Conflict> {
        let mut kinds = Vec::new();
        for (id, anc) in &self.base {
            if !self.working.contains_key(id) {
                continue;
            }
            if let (Some(a), Some(b)) = (self.side(Branch::A, id), self.side(Branch::B, id)) {
                kinds.extend(detect(id, Some(anc), a, b, &self.policy));
            }
        }
        let found = self.record(kinds);
        let ids: Vec<NodeId> = self
            .base
            .keys()
            .filter(|id| self.working.contains_key(*id))
            .cloned()
            .collect();
        self.resettle(&ids);
        found
    }

    /// Applies the policy. Under a branch preference every conflict takes
    /// the winner's side and the loser's side is recorded as dropped;
    /// under manual resolution nothing changes.
    pub fn resolve_conflicts(&mut self) -> &[DroppedEdit] {
        let Some(winner) = self.policy.resolution.winner() else {
            return &self.dropped;
        };
        let loser = winner.other();
        let mut holds: [Holds; 2] = Default::default();
        let mut affected = BTreeSet::new();
        let mut dropped = Vec::new();
        for conflict in &mut self.conflicts {
            if conflict.resolution != ConflictResolution::Unresolved {
                continue;
            }
            holds[loser.index()].hold(&conflict.kind, loser);
            conflict.resolution = ConflictResolution::took(winner);
            let change = match &conflict.kind {
                ConflictKind::Property { node, key, a, b, .. } | ConflictKind::AddAdd { node, key, a, b } => {
                    affected.insert(node.clone());
                    DroppedChange::Property {
                        node: node.clone(),
                        key: key.clone(),
                        value: if loser == Branch::A { a.clone() } else { b.clone() },
                    }
                }
                ConflictKind::Reparent { node, .. } => {
                    affected.insert(node.clone());
                    let parents = self.sides[loser.index()]
                        .get(node)
                        .map(|s| s.parents.iter().map(|(p, d)| (p.clone(), *d)).collect())
                        .unwrap_or_default();
                    DroppedChange::Structure {
                        node: node.clone(),
                        parents,
                    }
                }
                ConflictKind::DeleteModify {
                    deleting,
                    deleted,
                    group,
                    touched,
                } => {
                    affected.extend(group.iter().cloned());
                    affected.extend(touched.iter().cloned());
                    if *deleting == loser {
                        DroppedChange::Deletion {
                            node: deleted.clone(),
                            group: group.clone(),
                        }
                    } else {
                        DroppedChange::Modification {
                            deleted: deleted.clone(),
                            nodes: touched.clone(),
                        }
                    }
                }
                ConflictKind::Asset { .. } => continue,
            };
            dropped.push(DroppedEdit {
                branch: loser,
                change,
            });
        }
        self.holds = holds;
        self.resettle(&affected);
        self.dropped.extend(dropped);
        &self.dropped
    }

    /// Merges the asset manifests, repairs the working copy into a valid
    /// graph and assembles the outcome.
    pub fn finish(
        mut self,
        assets: &AssetMerger,
        store: &mut dyn BlobStore,
    ) -> Result<MergeOutcome, MergeError> {
        let manifests = merge_manifests(
            self.ancestor.assets(),
            self.versions[0].assets(),
            self.versions[1].assets(),
            store,
            assets,
            &self.policy,
        )?;
        self.conflicts.extend(manifests.conflicts);
        self.dropped.extend(manifests.dropped);

        let (mut graph, dangling) = finalize::build(self.ancestor.root(), &self.working);
        graph.set_manifest(manifests.manifest);
        let scrubbed = finalize::scrub_references(&mut graph);
        let lineage = [&self.base, &self.sides[0], &self.sides[1]];
        let relinked = finalize::relink(&mut graph, &dangling, &lineage);
        let (mut graph, removed_cycle_edges) = super::repair_cycles(&graph);
        for edge in &removed_cycle_edges {
            for branch in [Branch::A, Branch::B] {
                let version = self.versions[branch.index()];
                let dep = Some(edge.dependency);
                if version.edge(&edge.parent, &edge.child) == dep
                    && self.ancestor.edge(&edge.parent, &edge.child) != dep
                {
                    self.dropped.push(DroppedEdit {
                        branch,
                        change: DroppedChange::Edge(edge.clone()),
                    });
                }
            }
        }
        let reconnected = finalize::reconnect(&mut graph);

        let report = crate::graph::validate(&graph);
        if !report.is_valid() {
            return Err(MergeError::Internal(report));
        }

        let stats = MergeStats {
            ancestor_nodes: self.ancestor.node_count(),
            ancestor_edges: self.ancestor.edge_count(),
            diff_a_edited: diff_stats(&self.diffs[0]).total_edited,
            diff_b_edited: diff_stats(&self.diffs[1]).total_edited,
            merged_nodes: graph.node_count(),
            merged_edges: graph.edge_count(),
            wall_time: self.started.elapsed(),
        };
        Ok(MergeOutcome {
            merged: graph,
            conflicts: self.conflicts,
            dropped: self.dropped,
            removed_cycle_edges,
            relinked,
            reconnected,
            scrubbed,
            stats,
        })
    }
}

/// Partitions deleted nodes into groups connected by ancestor direct edges,
/// keyed by each group's topmost node.
fn deletion_groups(
    ancestor: &LevelGraph,
    deleted: &BTreeSet<NodeId>,
) -> BTreeMap<NodeId, BTreeSet<NodeId>> {
    let mut groups: BTreeMap<NodeId, BTreeSet<NodeId>> = BTreeMap::new();
    for id in deleted {
        let mut top = id;
        while let Some(p) = ancestor.direct_parent(top) {
            if !deleted.contains(p) {
                break;
            }
            top = p;
        }
        groups.entry(top.clone()).or_default().insert(id.clone());
    }
    groups
}
