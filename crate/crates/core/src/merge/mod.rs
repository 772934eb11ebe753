//! Three-way merge of level graphs.
//!
//! The pipeline is run by [`MergeSession`]: additions, deletions and
//! modifications from both branches are applied to a working copy of the
//! ancestor, conflicts are resolved by policy, and the result is repaired
//! (dangling references, orphans, cycles) and validated. [`merge3`] runs all
//! of it.
//!
//! Internally every node is merged slot by slot (each property key, and the
//! node's set of incoming edges). A conflicting slot is *held* at its
//! ancestor state for one or both branches; the policy decides which.

mod cycles;
mod finalize;
mod node;
mod phases;

use std::collections::BTreeSet;
use std::fmt;
use std::time::Duration;

use thiserror::Error;

use crate::assets::{AssetError, AssetMerger, BlobStore, MemoryBlobStore};
use crate::diff::DiffError;
use crate::graph::{
    AssetEntry, AssetId, Dependency, Edge, LevelGraph, NodeId, PropertyValue, ValidationReport,
};

pub use cycles::repair_cycles;
pub use phases::MergeSession;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Branch {
    A,
    B,
}

impl Branch {
    pub fn other(self) -> Branch {
        match self {
            Branch::A => Branch::B,
            Branch::B => Branch::A,
        }
    }

    pub(crate) fn index(self) -> usize {
        match self {
            Branch::A => 0,
            Branch::B => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Branch::A => "a",
            Branch::B => "b",
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub enum Resolution {
    /// Leave conflicts unresolved; conflicting items keep their ancestor
    /// state.
    #[default]
    Manual,
    PreferA,
    PreferB,
}

impl Resolution {
    pub fn winner(self) -> Option<Branch> {
        match self {
            Resolution::Manual => None,
            Resolution::PreferA => Some(Branch::A),
            Resolution::PreferB => Some(Branch::B),
        }
    }

    pub fn prefer(branch: Branch) -> Self {
        match branch {
            Branch::A => Resolution::PreferA,
            Branch::B => Resolution::PreferB,
        }
    }

    /// The same preference with the branch arguments exchanged.
    pub fn swapped(self) -> Self {
        match self {
            Resolution::Manual => Resolution::Manual,
            Resolution::PreferA => Resolution::PreferB,
            Resolution::PreferB => Resolution::PreferA,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Resolution::Manual => "manual",
            Resolution::PreferA => "prefer-a",
            Resolution::PreferB => "prefer-b",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        match text {
            "manual" => Some(Resolution::Manual),
            "prefer-a" | "ours" | "mine" => Some(Resolution::PreferA),
            "prefer-b" | "theirs" => Some(Resolution::PreferB),
            _ => None,
        }
    }
}

impl fmt::Display for Resolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MergePolicy {
    pub resolution: Resolution,
    /// Concurrent edits of one real-valued property resolve to their mean
    /// when the node's kind is in `averageable_kinds`.
    pub numeric_averaging: bool,
    pub averageable_kinds: BTreeSet<String>,
}

impl MergePolicy {
    pub fn new(resolution: Resolution) -> Self {
        MergePolicy {
            resolution,
            ..MergePolicy::default()
        }
    }

    pub fn with_averaging<I, S>(mut self, kinds: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.numeric_averaging = true;
        self.averageable_kinds = kinds.into_iter().map(Into::into).collect();
        self
    }

    pub fn swapped(&self) -> Self {
        MergePolicy {
            resolution: self.resolution.swapped(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConflictKind {
    Property {
        node: NodeId,
        key: String,
        ancestor: Option<PropertyValue>,
        a: Option<PropertyValue>,
        b: Option<PropertyValue>,
    },
    /// `deleting` removed `deleted` (with the rest of `group`) while the
    /// other branch edited the nodes in `touched`.
    DeleteModify {
        deleting: Branch,
        deleted: NodeId,
        group: Vec<NodeId>,
        touched: Vec<NodeId>,
    },
    Reparent {
        node: NodeId,
        parent_a: Option<NodeId>,
        parent_b: Option<NodeId>,
    },
    AddAdd {
        node: NodeId,
        key: String,
        a: Option<PropertyValue>,
        b: Option<PropertyValue>,
    },
    Asset {
        asset: AssetId,
        ancestor: Option<AssetEntry>,
        a: Option<AssetEntry>,
        b: Option<AssetEntry>,
    },
}

impl ConflictKind {
    pub fn tag(&self) -> &'static str {
        match self {
            ConflictKind::Property { .. } => "property",
            ConflictKind::DeleteModify { .. } => "delete-modify",
            ConflictKind::Reparent { .. } => "reparent",
            ConflictKind::AddAdd { .. } => "add-add",
            ConflictKind::Asset { .. } => "asset",
        }
    }

    /// The kind as seen with the branch arguments exchanged.
    pub fn swapped(&self) -> ConflictKind {
        match self.clone() {
            ConflictKind::Property { node, key, ancestor, a, b } => ConflictKind::Property {
                node,
                key,
                ancestor,
                a: b,
                b: a,
            },
            ConflictKind::DeleteModify { deleting, deleted, group, touched } => {
                ConflictKind::DeleteModify {
                    deleting: deleting.other(),
                    deleted,
                    group,
                    touched,
                }
            }
            ConflictKind::Reparent { node, parent_a, parent_b } => ConflictKind::Reparent {
                node,
                parent_a: parent_b,
                parent_b: parent_a,
            },
            ConflictKind::AddAdd { node, key, a, b } => ConflictKind::AddAdd { node, key, a: b, b: a },
            ConflictKind::Asset { asset, ancestor, a, b } => ConflictKind::Asset {
                asset,
                ancestor,
                a: b,
                b: a,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConflictResolution {
    #[default]
    Unresolved,
    TookA,
    TookB,
}

impl ConflictResolution {
    pub fn took(branch: Branch) -> Self {
        match branch {
            Branch::A => ConflictResolution::TookA,
            Branch::B => ConflictResolution::TookB,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ConflictResolution::Unresolved => "unresolved",
            ConflictResolution::TookA => "took-a",
            ConflictResolution::TookB => "took-b",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        match text {
            "unresolved" => Some(ConflictResolution::Unresolved),
            "took-a" => Some(ConflictResolution::TookA),
            "took-b" => Some(ConflictResolution::TookB),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Conflict {
    pub kind: ConflictKind,
    pub resolution: ConflictResolution,
}

impl Conflict {
    pub fn new(kind: ConflictKind) -> Self {
        Conflict {
            kind,
            resolution: ConflictResolution::Unresolved,
        }
    }

    /// Comparable summary: kind tag, subject and (for delete/modify) the
    /// deleting branch.
    pub fn signature(&self) -> ConflictSignature {
        let (subject, detail) = match &self.kind {
            ConflictKind::Property { node, key, .. } | ConflictKind::AddAdd { node, key, .. } => {
                (node.to_string(), key.clone())
            }
            ConflictKind::DeleteModify { deleting, deleted, .. } => {
                (deleted.to_string(), deleting.as_str().to_owned())
            }
            ConflictKind::Reparent { node, .. } => (node.to_string(), String::new()),
            ConflictKind::Asset { asset, .. } => (asset.to_string(), String::new()),
        };
        ConflictSignature {
            tag: self.kind.tag(),
            subject,
            detail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConflictSignature {
    pub tag: &'static str,
    pub subject: String,
    pub detail: String,
}

impl fmt::Display for ConflictSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.tag, self.subject)?;
        if !self.detail.is_empty() {
            write!(f, " {}", self.detail)?;
        }
        Ok(())
    }
}

/// An edit of one branch that did not make it into the merge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DroppedEdit {
    pub branch: Branch,
    pub change: DroppedChange,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DroppedChange {
    /// The branch's value for a property (`None`: it removed the key).
    Property {
        node: NodeId,
        key: String,
        value: Option<PropertyValue>,
    },
    /// The branch's incoming edges for a node.
    Structure {
        node: NodeId,
        parents: Vec<(NodeId, Dependency)>,
    },
    /// The branch's deletion of `node` and the rest of `group`.
    Deletion { node: NodeId, group: Vec<NodeId> },
    /// The branch's edits to nodes the other branch deleted.
    Modification { deleted: NodeId, nodes: Vec<NodeId> },
    /// An edge the branch introduced, removed to break a cycle.
    Edge(Edge),
    Asset {
        asset: AssetId,
        entry: Option<AssetEntry>,
        /// Validator output when the version was rejected by a code gate.
        rejected: Option<String>,
    },
}

/// A property removed because its target no longer exists in the merge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScrubbedReference {
    pub node: NodeId,
    pub key: String,
    pub value: PropertyValue,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MergeStats {
    pub ancestor_nodes: usize,
    pub ancestor_edges: usize,
    pub diff_a_edited: usize,
    pub diff_b_edited: usize,
    pub merged_nodes: usize,
    pub merged_edges: usize,
    pub wall_time: Duration,
}

#[derive(Debug, Clone)]
pub struct MergeOutcome {
    pub merged: LevelGraph,
    pub conflicts: Vec<Conflict>,
    pub dropped: Vec<DroppedEdit>,
    /// In removal order.
    pub removed_cycle_edges: Vec<Edge>,
    /// Edges added to re-attach survivors of a deleted parent.
    pub relinked: Vec<Edge>,
    /// Edges added from the root to otherwise unreachable nodes.
    pub reconnected: Vec<Edge>,
    pub scrubbed: Vec<ScrubbedReference>,
    pub stats: MergeStats,
}

impl MergeOutcome {
    pub fn unresolved(&self) -> impl Iterator<Item = &Conflict> {
        self.conflicts
            .iter()
            .filter(|c| c.resolution == ConflictResolution::Unresolved)
    }

    pub fn has_unresolved(&self) -> bool {
        self.unresolved().next().is_some()
    }
}

#[derive(Debug, Error)]
pub enum MergeError {
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error("node `{node}` has kind `{a}` in one branch and `{b}` in the other")]
    KindMismatch { node: NodeId, a: String, b: String },
    #[error(transparent)]
    Asset(#[from] AssetError),
    #[error("internal error: merge produced an invalid graph:\n{0}")]
    Internal(ValidationReport),
}

/// Configured merge engine: a policy plus the asset strategies and
/// validators to consult.
#[derive(Default)]
pub struct Merger {
    pub policy: MergePolicy,
    pub assets: AssetMerger,
}

impl Merger {
    pub fn new(policy: MergePolicy) -> Self {
        Merger {
            policy,
            assets: AssetMerger::default(),
        }
    }

    pub fn with_assets(mut self, assets: AssetMerger) -> Self {
        self.assets = assets;
        self
    }

    pub fn merge(
        &self,
        ancestor: &LevelGraph,
        mine: &LevelGraph,
        theirs: &LevelGraph,
        store: &mut dyn BlobStore,
    ) -> Result<MergeOutcome, MergeError> {
        let mut session = MergeSession::new(ancestor, mine, theirs, self.policy.clone())?;
        session.apply_additions();
        session.apply_deletions();
        session.apply_modifications();
        session.resolve_conflicts();
        session.finish(&self.assets, store)
    }
}

/// Merges with the default asset handling (atomic, no validators) and an
/// empty blob store.
pub fn merge3(
    ancestor: &LevelGraph,
    mine: &LevelGraph,
    theirs: &LevelGraph,
    policy: &MergePolicy,
) -> Result<MergeOutcome, MergeError> {
    Merger::new(policy.clone()).merge(ancestor, mine, theirs, &mut MemoryBlobStore::default())
}
