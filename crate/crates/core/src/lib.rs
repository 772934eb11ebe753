//! Three-way diff and merge of game levels modeled as labeled directed
//! acyclic graphs.

pub mod assets;
pub mod diff;
pub mod graph;
pub mod format;
pub mod merge;
pub mod sim;

pub use diff::{classify, ChangeClass, DiffResult};
pub use graph::{Dependency, Edge, LevelGraph, Node, NodeId, PropertyValue};
pub use merge::{merge3, MergeOutcome, MergePolicy, Resolution};
