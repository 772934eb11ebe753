use std::fmt;

use super::algo::Indexed;
use super::{AssetId, Dependency, LevelGraph, NodeId, PropertyValue};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// A strongly connected component with more than one node.
    Cycle { nodes: Vec<NodeId> },
    Unreachable { node: NodeId },
    RootHasParent { parent: NodeId },
    MultipleDirectParents { node: NodeId, parents: Vec<NodeId> },
    DanglingNodeReference { node: NodeId, key: String, target: NodeId },
    DanglingAssetReference { node: NodeId, key: String, asset: AssetId },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Cycle { nodes } => {
                let names: Vec<&str> = nodes.iter().map(NodeId::as_str).collect();
                write!(f, "cycle through {{{}}}", names.join(", "))
            }
            Violation::Unreachable { node } => write!(f, "node `{node}` is not reachable from the root"),
            Violation::RootHasParent { parent } => write!(f, "root has an incoming edge from `{parent}`"),
            Violation::MultipleDirectParents { node, parents } => {
                let names: Vec<&str> = parents.iter().map(NodeId::as_str).collect();
                write!(f, "node `{node}` has several direct parents: {}", names.join(", "))
            }
            Violation::DanglingNodeReference { node, key, target } => {
                write!(f, "property `{node}.{key}` references missing node `{target}`")
            }
            Violation::DanglingAssetReference { node, key, asset } => {
                write!(f, "property `{node}.{key}` references asset `{asset}` missing from the manifest")
            }
        }
    }
}

/// Every invariant violation found in a graph; empty means valid.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

pub fn validate(graph: &LevelGraph) -> ValidationReport {
    let mut violations = Vec::new();
    let index = Indexed::new(graph);

    let mut cycles: Vec<Vec<NodeId>> = index
        .tarjan()
        .into_iter()
        .filter(|c| c.len() > 1)
        .map(|c| {
            let mut ids: Vec<NodeId> = c.into_iter().map(|v| index.ids[v].clone()).collect();
            ids.sort();
            ids
        })
        .collect();
    cycles.sort();
    violations.extend(cycles.into_iter().map(|nodes| Violation::Cycle { nodes }));

    let seen = index.reachable(index.pos[graph.root()]);
    for (id, reached) in index.ids.iter().zip(&seen) {
        if !reached {
            violations.push(Violation::Unreachable { node: (*id).clone() });
        }
    }

    for parent in graph.parents(graph.root()).keys() {
        violations.push(Violation::RootHasParent { parent: parent.clone() });
    }

    for node in graph.nodes() {
        let direct: Vec<NodeId> = graph
            .parents(&node.id)
            .iter()
            .filter(|(_, d)| **d == Dependency::Direct)
            .map(|(p, _)| p.clone())
            .collect();
        if direct.len() > 1 {
            violations.push(Violation::MultipleDirectParents {
                node: node.id.clone(),
                parents: direct,
            });
        }
        for (key, value) in &node.properties {
            match value {
                PropertyValue::Node(target) if !graph.contains(target) => {
                    violations.push(Violation::DanglingNodeReference {
                        node: node.id.clone(),
                        key: key.clone(),
                        target: target.clone(),
                    })
                }
                PropertyValue::Asset(asset) if !graph.assets().contains_key(asset) => {
                    violations.push(Violation::DanglingAssetReference {
                        node: node.id.clone(),
                        key: key.clone(),
                        asset: asset.clone(),
                    })
                }
                _ => {}
            }
        }
    }

    ValidationReport { violations }
}
