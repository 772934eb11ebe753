//! `.levelmerge.toml`, looked up from the working directory upwards.
//!
//! ```toml
//! policy = "prefer-b"
//!
//! [averaging]
//! enabled = true
//! kinds = ["Material", "Light"]
//!
//! [assets]
//! store = ".levelmerge/blobs"
//!
//! [[assets.strategy]]
//! type = "mesh"
//! command = ["meshmerge", "--quiet"]
//!
//! [assets.validators]
//! code = "luac -p"
//!
//! [user]
//! name = "ana"
//! color = "#e06c75"
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use levelmerge::assets::{AssetMerger, CodeValidator, DirBlobStore, ExternalCommandStrategy};
use levelmerge::{MergePolicy, Resolution};

pub const FILE_NAME: &str = ".levelmerge.toml";
pub const ENV_VAR: &str = "LEVELMERGE_CONFIG";
const DEFAULT_STORE: &str = ".levelmerge/blobs";

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub policy: Option<String>,
    #[serde(default)]
    pub averaging: Averaging,
    #[serde(default)]
    pub assets: Assets,
    pub user: Option<User>,
    /// Directory the config was read from; relative paths resolve against it.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Averaging {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default)]
    pub kinds: Vec<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Assets {
    pub store: Option<PathBuf>,
    #[serde(default)]
    pub strategy: Vec<StrategyEntry>,
    #[serde(default)]
    pub validators: BTreeMap<String, CommandSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyEntry {
    #[serde(rename = "type")]
    pub type_tag: String,
    pub command: CommandSpec,
}

/// A command as an argv array, or a string split on whitespace.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum CommandSpec {
    Argv(Vec<String>),
    Line(String),
}

impl CommandSpec {
    pub fn argv(&self) -> Vec<String> {
        match self {
            CommandSpec::Argv(v) => v.clone(),
            CommandSpec::Line(s) => s.split_whitespace().map(str::to_owned).collect(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct User {
    pub name: String,
    pub color: Option<String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Config> {
        let config: Config = toml::from_str(text)?;
        if let Some(p) = &config.policy {
            if Resolution::parse(p).is_none() {
                bail!("unknown policy `{p}` (expected manual, prefer-a or prefer-b)");
            }
        }
        Ok(config)
    }

    pub fn read(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut config = Config::parse(&text).with_context(|| format!("in {}", path.display()))?;
        config.base_dir = path.parent().map(Path::to_path_buf);
        Ok(config)
    }

    /// An explicit path wins over the environment variable, which wins over
    /// the nearest `.levelmerge.toml`. No file at all means defaults.
    pub fn load(explicit: Option<&Path>) -> Result<Config> {
        if let Some(path) = explicit {
            return Config::read(path);
        }
        if let Some(path) = std::env::var_os(ENV_VAR).filter(|v| !v.is_empty()) {
            return Config::read(Path::new(&path));
        }
        let cwd = std::env::current_dir()?;
        for dir in cwd.ancestors() {
            let candidate = dir.join(FILE_NAME);
            if candidate.is_file() {
                return Config::read(&candidate);
            }
        }
        Ok(Config::default())
    }

    /// The configured policy, overridden by `flag` when given.
    pub fn policy(&self, flag: Option<Resolution>) -> MergePolicy {
        let resolution = flag
            .or_else(|| self.policy.as_deref().and_then(Resolution::parse))
            .unwrap_or_default();
        let policy = MergePolicy::new(resolution);
        if self.averaging.enabled {
            policy.with_averaging(self.averaging.kinds.iter().cloned())
        } else {
            policy
        }
    }

    pub fn asset_merger(&self) -> Result<AssetMerger> {
        let mut merger = AssetMerger::default();
        for entry in &self.assets.strategy {
            let strategy = ExternalCommandStrategy::new(entry.type_tag.clone(), entry.command.argv())
                .with_context(|| format!("strategy for `{}`", entry.type_tag))?;
            merger = merger.with_strategy(Box::new(strategy));
        }
        for (tag, command) in &self.assets.validators {
            let validator = CodeValidator::new(command.argv()).with_context(|| format!("validator for `{tag}`"))?;
            merger = merger.with_validator(tag.clone(), validator);
        }
        Ok(merger)
    }

    pub fn blob_store(&self) -> DirBlobStore {
        let path = self.assets.store.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_STORE));
        match &self.base_dir {
            Some(dir) if path.is_relative() => DirBlobStore::new(dir.join(path)),
            _ => DirBlobStore::new(path),
        }
    }
}
