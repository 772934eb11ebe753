//! Asset handling. Assets are opaque blobs identified by a path-like id and
//! stored by content digest; a level carries only the manifest. Manifests
//! are merged per asset id, delegating concurrent edits to a strategy chosen
//! by type tag.

pub mod strategy;
pub mod validator;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::graph::{AssetEntry, AssetId, Digest, Manifest};
use crate::merge::{Branch, Conflict, ConflictKind, ConflictResolution, DroppedChange, DroppedEdit, MergePolicy};

pub use strategy::{
    atomic_choice, AssetMergeResult, AssetMergeStrategy, AssetVersions, AtomicChoice, AtomicStrategy,
    ExternalCommandStrategy, StrategyRegistry,
};
pub use validator::{validate_code_asset, CodeValidator, ValidationOutcome};

#[derive(Debug, Error)]
pub enum AssetError {
    #[error("blob {digest} for asset `{asset}` is missing from the store")]
    MissingBlob { asset: AssetId, digest: Digest },
    #[error("command must not be empty")]
    EmptyCommand,
    #[error("cannot run `{command}`: {source}")]
    CommandUnavailable { command: String, source: io::Error },
    #[error("merge strategy for `{tag}` failed ({status}): {stderr}")]
    StrategyFailed { tag: String, status: String, stderr: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssetBlob {
    pub id: AssetId,
    pub type_tag: String,
    pub content: Vec<u8>,
    digest: Digest,
}

impl AssetBlob {
    pub fn new(id: AssetId, type_tag: impl Into<String>, content: Vec<u8>) -> Self {
        let digest = Digest::of(&content);
        AssetBlob {
            id,
            type_tag: type_tag.into(),
            content,
            digest,
        }
    }

    pub fn digest(&self) -> &Digest {
        &self.digest
    }

    pub fn entry(&self) -> AssetEntry {
        AssetEntry {
            type_tag: self.type_tag.clone(),
            digest: self.digest.clone(),
        }
    }
}

/// Content-addressed blob storage.
pub trait BlobStore {
    fn get(&self, digest: &Digest) -> Result<Option<Vec<u8>>, AssetError>;
    fn put(&mut self, content: &[u8]) -> Result<Digest, AssetError>;
}

#[derive(Debug, Clone, Default)]
pub struct MemoryBlobStore {
    blobs: HashMap<Digest, Vec<u8>>,
}

impl BlobStore for MemoryBlobStore {
    fn get(&self, digest: &Digest) -> Result<Option<Vec<u8>>, AssetError> {
        Ok(self.blobs.get(digest).cloned())
    }

    fn put(&mut self, content: &[u8]) -> Result<Digest, AssetError> {
        let digest = Digest::of(content);
        self.blobs.insert(digest.clone(), content.to_vec());
        Ok(digest)
    }
}

/// One file per blob, named by its digest.
#[derive(Debug, Clone)]
pub struct DirBlobStore {
    dir: PathBuf,
}

impl DirBlobStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        DirBlobStore { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

impl BlobStore for DirBlobStore {
    fn get(&self, digest: &Digest) -> Result<Option<Vec<u8>>, AssetError> {
        match fs::read(self.dir.join(digest.as_str())) {
            Ok(content) => Ok(Some(content)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    fn put(&mut self, content: &[u8]) -> Result<Digest, AssetError> {
        let digest = Digest::of(content);
        fs::create_dir_all(&self.dir)?;
        let path = self.dir.join(digest.as_str());
        if !path.exists() {
            fs::write(path, content)?;
        }
        Ok(digest)
    }
}

/// Strategies and code validators consulted while merging manifests.
#[derive(Debug, Default)]
pub struct AssetMerger {
    pub registry: StrategyRegistry,
    pub validators: BTreeMap<String, CodeValidator>,
}

impl AssetMerger {
    pub fn with_strategy(mut self, strategy: Box<dyn AssetMergeStrategy>) -> Self {
        self.registry.register(strategy);
        self
    }

    pub fn with_validator(mut self, type_tag: impl Into<String>, validator: CodeValidator) -> Self {
        self.validators.insert(type_tag.into(), validator);
        self
    }
}

#[derive(Debug, Clone, Default)]
pub struct ManifestMerge {
    pub manifest: Manifest,
    pub conflicts: Vec<Conflict>,
    pub dropped: Vec<DroppedEdit>,
}

fn load(store: &dyn BlobStore, id: &AssetId, entry: &AssetEntry) -> Result<AssetBlob, AssetError> {
    let content = store.get(&entry.digest)?.ok_or_else(|| AssetError::MissingBlob {
        asset: id.clone(),
        digest: entry.digest.clone(),
    })?;
    Ok(AssetBlob::new(id.clone(), entry.type_tag.clone(), content))
}

/// Merges three manifests asset by asset. Assets edited differently on both
/// sides go to the strategy registered for their type tag; a strategy
/// conflict is resolved by the policy like any other conflict. Merged
/// versions of types with a validator must pass it, or the asset falls back
/// to the preferred branch's version (if that passes) or the ancestor's.
pub fn merge_manifests(
    ancestor: &Manifest,
    mine: &Manifest,
    theirs: &Manifest,
    store: &mut dyn BlobStore,
    merger: &AssetMerger,
    policy: &MergePolicy,
) -> Result<ManifestMerge, AssetError> {
    let mut out = ManifestMerge::default();
    let ids: BTreeSet<&AssetId> = ancestor.keys().chain(mine.keys()).chain(theirs.keys()).collect();
    for id in ids {
        let (c, a, b) = (ancestor.get(id), mine.get(id), theirs.get(id));
        let entry_of = |branch: Branch| if branch == Branch::A { a } else { b };
        let mut lost: Option<Branch> = None;

        let mut result = match merge_entry(id, c, a, b, store, merger)? {
            Some(result) => result,
            None => {
                let mut conflict = Conflict::new(ConflictKind::Asset {
                    asset: id.clone(),
                    ancestor: c.cloned(),
                    a: a.cloned(),
                    b: b.cloned(),
                });
                let result = match policy.resolution.winner() {
                    None => c.cloned(),
                    Some(winner) => {
                        conflict.resolution = ConflictResolution::took(winner);
                        let loser = winner.other();
                        lost = Some(loser);
                        out.dropped.push(DroppedEdit {
                            branch: loser,
                            change: DroppedChange::Asset {
                                asset: id.clone(),
                                entry: entry_of(loser).cloned(),
                                rejected: None,
                            },
                        });
                        entry_of(winner).cloned()
                    }
                };
                out.conflicts.push(conflict);
                result
            }
        };

        if let Some(entry) = result.clone().filter(|e| Some(e) != c) {
            if let Some(validator) = merger.validators.get(&entry.type_tag) {
                if let ValidationOutcome::Fail(message) = validator.check(&load(store, id, &entry)?)? {
                    result = c.cloned();
                    let preferred = policy.resolution.winner().and_then(entry_of).filter(|e| **e != entry);
                    if let Some(candidate) = preferred.filter(|e| Some(*e) != c) {
                        if validator.check(&load(store, id, candidate)?)? == ValidationOutcome::Pass {
                            result = Some(candidate.clone());
                        }
                    }
                    for branch in [Branch::A, Branch::B] {
                        let version = entry_of(branch);
                        if version != c && version != result.as_ref() && lost != Some(branch) {
                            out.dropped.push(DroppedEdit {
                                branch,
                                change: DroppedChange::Asset {
                                    asset: id.clone(),
                                    entry: version.cloned(),
                                    rejected: Some(message.clone()),
                                },
                            });
                        }
                    }
                }
            }
        }

        if let Some(entry) = result {
            out.manifest.insert(id.clone(), entry);
        }
    }
    Ok(out)
}

/// Three-way merge of one manifest entry. `Ok(None)` is a conflict.
fn merge_entry(
    id: &AssetId,
    c: Option<&AssetEntry>,
    a: Option<&AssetEntry>,
    b: Option<&AssetEntry>,
    store: &mut dyn BlobStore,
    merger: &AssetMerger,
) -> Result<Option<Option<AssetEntry>>, AssetError> {
    let choice = if a == b {
        if a == c { AtomicChoice::Ancestor } else { AtomicChoice::Mine }
    } else if b == c {
        AtomicChoice::Mine
    } else if a == c {
        AtomicChoice::Theirs
    } else {
        AtomicChoice::Conflict
    };
    match choice {
        AtomicChoice::Ancestor => return Ok(Some(c.cloned())),
        AtomicChoice::Mine => return Ok(Some(a.cloned())),
        AtomicChoice::Theirs => return Ok(Some(b.cloned())),
        AtomicChoice::Conflict => {}
    }
    // Both sides changed the entry differently.
    let (Some(ea), Some(eb)) = (a, b) else {
        return Ok(None);
    };
    if ea.type_tag != eb.type_tag {
        return Ok(None);
    }
    let strategy = merger.registry.get(&ea.type_tag);
    if !strategy.requires_content() {
        return Ok(None);
    }
    let ancestor = c.map(|e| load(store, id, e)).transpose()?;
    let (mine, theirs) = (load(store, id, ea)?, load(store, id, eb)?);
    let versions = AssetVersions {
        ancestor: ancestor.as_ref(),
        mine: Some(&mine),
        theirs: Some(&theirs),
    };
    Ok(match strategy.merge3(&versions)? {
        AssetMergeResult::Merged(content) => {
            let digest = store.put(&content)?;
            Some(Some(AssetEntry {
                type_tag: ea.type_tag.clone(),
                digest,
            }))
        }
        AssetMergeResult::Deleted => Some(None),
        AssetMergeResult::Conflict => None,
    })
}
