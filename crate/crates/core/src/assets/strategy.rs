//! Per-type asset merge strategies, looked up by type tag.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::process::Command;

use crate::graph::Digest;

use super::{AssetBlob, AssetError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AssetMergeResult {
    Merged(Vec<u8>),
    Conflict,
    Deleted,
}

/// The three versions of one asset. `None` means absent in that version.
#[derive(Debug, Clone, Copy)]
pub struct AssetVersions<'a> {
    pub ancestor: Option<&'a AssetBlob>,
    pub mine: Option<&'a AssetBlob>,
    pub theirs: Option<&'a AssetBlob>,
}

pub trait AssetMergeStrategy: Send + Sync {
    /// The asset type this strategy is registered for.
    fn type_tag(&self) -> &str;

    /// Whether `merge3` needs blob content. Strategies that only compare
    /// digests let the merge skip loading blobs.
    fn requires_content(&self) -> bool {
        true
    }

    fn merge3(&self, versions: &AssetVersions<'_>) -> Result<AssetMergeResult, AssetError>;
}

/// Outcome of the digest-only three-way table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AtomicChoice {
    Ancestor,
    Mine,
    Theirs,
    Conflict,
}

/// Three-way choice over digests alone; `None` is absence.
pub fn atomic_choice(ancestor: Option<&Digest>, mine: Option<&Digest>, theirs: Option<&Digest>) -> AtomicChoice {
    if mine == theirs {
        if mine == ancestor {
            AtomicChoice::Ancestor
        } else {
            AtomicChoice::Mine
        }
    } else if theirs == ancestor {
        AtomicChoice::Mine
    } else if mine == ancestor {
        AtomicChoice::Theirs
    } else {
        AtomicChoice::Conflict
    }
}

/// Fallback for tags without a registered strategy: a blob is either taken
/// whole or the edit conflicts.
#[derive(Debug, Clone, Copy, Default)]
pub struct AtomicStrategy;

impl AssetMergeStrategy for AtomicStrategy {
    fn type_tag(&self) -> &str {
        "*"
    }

    fn requires_content(&self) -> bool {
        false
    }

    fn merge3(&self, v: &AssetVersions<'_>) -> Result<AssetMergeResult, AssetError> {
        let digest = |b: Option<&AssetBlob>| b.map(|b| b.digest().clone());
        let (anc, mine, theirs) = (digest(v.ancestor), digest(v.mine), digest(v.theirs));
        let chosen = match atomic_choice(anc.as_ref(), mine.as_ref(), theirs.as_ref()) {
            AtomicChoice::Conflict => return Ok(AssetMergeResult::Conflict),
            AtomicChoice::Ancestor => v.ancestor,
            AtomicChoice::Mine => v.mine,
            AtomicChoice::Theirs => v.theirs,
        };
        Ok(match chosen {
            Some(blob) => AssetMergeResult::Merged(blob.content.clone()),
            None => AssetMergeResult::Deleted,
        })
    }
}

/// Delegates to an external program invoked as
/// `<cmd...> <ancestor|-> <mine> <theirs> <out>`. Exit status 0 means the
/// result was written to `<out>`, 1 means conflict, anything else is a
/// failure.
#[derive(Debug, Clone)]
pub struct ExternalCommandStrategy {
    type_tag: String,
    command: Vec<String>,
}

impl ExternalCommandStrategy {
    pub fn new(type_tag: impl Into<String>, command: Vec<String>) -> Result<Self, AssetError> {
        if command.is_empty() {
            return Err(AssetError::EmptyCommand);
        }
        Ok(ExternalCommandStrategy {
            type_tag: type_tag.into(),
            command,
        })
    }
}

impl AssetMergeStrategy for ExternalCommandStrategy {
    fn type_tag(&self) -> &str {
        &self.type_tag
    }

    fn merge3(&self, v: &AssetVersions<'_>) -> Result<AssetMergeResult, AssetError> {
        // The protocol needs both sides; delete/modify is left to policy.
        let (Some(mine), Some(theirs)) = (v.mine, v.theirs) else {
            return Ok(AssetMergeResult::Conflict);
        };
        let dir = tempfile::tempdir()?;
        let write = |name: &str, blob: &AssetBlob| -> io::Result<String> {
            let path = dir.path().join(name);
            fs::write(&path, &blob.content)?;
            Ok(path.to_string_lossy().into_owned())
        };
        let ancestor = match v.ancestor {
            Some(blob) => write("ancestor", blob)?,
            None => "-".to_owned(),
        };
        let mine = write("mine", mine)?;
        let theirs = write("theirs", theirs)?;
        let out = dir.path().join("out");

        let output = Command::new(&self.command[0])
            .args(&self.command[1..])
            .args([&ancestor, &mine, &theirs])
            .arg(&out)
            .output()
            .map_err(|source| AssetError::CommandUnavailable {
                command: self.command[0].clone(),
                source,
            })?;
        match output.status.code() {
            Some(0) => Ok(AssetMergeResult::Merged(fs::read(&out)?)),
            Some(1) => Ok(AssetMergeResult::Conflict),
            _ => Err(AssetError::StrategyFailed {
                tag: self.type_tag.clone(),
                status: output.status.to_string(),
                stderr: String::from_utf8_lossy(&output.stderr).into_owned(),
            }),
        }
    }
}

/// Strategies keyed by type tag, with the atomic strategy for everything
/// unregistered.
#[derive(Default)]
pub struct StrategyRegistry {
    strategies: BTreeMap<String, Box<dyn AssetMergeStrategy>>,
    fallback: AtomicStrategy,
}

impl StrategyRegistry {
    /// Registers a strategy under its own tag, returning any strategy it
    /// replaces.
    pub fn register(&mut self, strategy: Box<dyn AssetMergeStrategy>) -> Option<Box<dyn AssetMergeStrategy>> {
        self.strategies.insert(strategy.type_tag().to_owned(), strategy)
    }

    pub fn get(&self, type_tag: &str) -> &dyn AssetMergeStrategy {
        match self.strategies.get(type_tag) {
            Some(s) => s.as_ref(),
            None => &self.fallback,
        }
    }

    pub fn is_registered(&self, type_tag: &str) -> bool {
        self.strategies.contains_key(type_tag)
    }

    pub fn tags(&self) -> impl Iterator<Item = &str> {
        self.strategies.keys().map(String::as_str)
    }
}

impl std::fmt::Debug for StrategyRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.tags()).finish()
    }
}
