//! Seeded scenario generation and invariant checking for the merge engine.

mod apply;
mod check;
mod generate;

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::graph::{Dependency, LevelGraph, NodeId, PropertyValue, ValidationReport};
use crate::merge::MergePolicy;

pub use apply::{apply_op, apply_script};
pub use check::{check_scenario, ConflictOracle, Law, LawViolation, Verdict};
pub use generate::{generate, generate_scaled, OpWeights, ScalePreset, ScaleTargets, SizeParams};

#[derive(Debug, Clone, PartialEq)]
pub enum EditOp {
    AddNode {
        id: NodeId,
        kind: String,
        parent: NodeId,
        properties: BTreeMap<String, PropertyValue>,
    },
    DeleteNode {
        id: NodeId,
    },
    SetProperty {
        id: NodeId,
        key: String,
        value: PropertyValue,
    },
    RemoveProperty {
        id: NodeId,
        key: String,
    },
    Reparent {
        id: NodeId,
        new_parent: NodeId,
    },
    ChangeDepKind {
        parent: NodeId,
        child: NodeId,
        dependency: Dependency,
    },
    AddIndirectEdge {
        parent: NodeId,
        child: NodeId,
    },
    RemoveIndirectEdge {
        parent: NodeId,
        child: NodeId,
    },
}

impl fmt::Display for EditOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EditOp::AddNode { id, kind, parent, .. } => write!(f, "add {id} ({kind}) under {parent}"),
            EditOp::DeleteNode { id } => write!(f, "delete {id}"),
            EditOp::SetProperty { id, key, value } => write!(f, "set {id}.{key} = {value}"),
            EditOp::RemoveProperty { id, key } => write!(f, "remove {id}.{key}"),
            EditOp::Reparent { id, new_parent } => write!(f, "reparent {id} under {new_parent}"),
            EditOp::ChangeDepKind { parent, child, dependency } => {
                write!(f, "make {parent} -> {child} {dependency}")
            }
            EditOp::AddIndirectEdge { parent, child } => write!(f, "link {parent} -> {child}"),
            EditOp::RemoveIndirectEdge { parent, child } => write!(f, "unlink {parent} -> {child}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub seed: u64,
    pub base: LevelGraph,
    pub script_a: Vec<EditOp>,
    pub script_b: Vec<EditOp>,
    pub policy: MergePolicy,
}

impl Scenario {
    /// Both branch versions.
    pub fn versions(&self) -> Result<(LevelGraph, LevelGraph), SimError> {
        Ok((apply_script(&self.base, &self.script_a)?, apply_script(&self.base, &self.script_b)?))
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("op {index} ({op}) is not applicable: {reason}")]
    Inapplicable { index: usize, op: String, reason: String },
    #[error("script produced an invalid graph:\n{0}")]
    InvalidResult(ValidationReport),
    #[error("unsatisfiable size parameters: {0}")]
    Unsatisfiable(String),
}
