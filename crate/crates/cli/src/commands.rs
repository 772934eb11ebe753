use std::fs;
use std::io::Write as _;
use std::path::Path;

use anyhow::{Context, Result};

use levelmerge::diff::{diff_stats, DiffResult};
use levelmerge::format::{parse, serialize_graph, MergeReport};
use levelmerge::graph::validate as check;
use levelmerge::merge::Merger;
use levelmerge::{classify, ChangeClass, LevelGraph, MergeOutcome, MergePolicy};

use crate::config::Config;

pub fn load(path: &Path) -> Result<LevelGraph> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let doc = parse(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(doc.graph)
}

/// Writes through a sibling temporary file so that `path` is never left
/// half-written.
fn write_atomically(path: &Path, content: &str) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".levelmerge-tmp");
    fs::write(&tmp, content).with_context(|| format!("writing {}", path.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("replacing {}", path.display()))?;
    Ok(())
}

pub fn validate(path: &Path) -> Result<u8> {
    let report = check(&load(path)?);
    if report.is_valid() {
        println!("{}: valid", path.display());
        Ok(0)
    } else {
        print!("{report}");
        Ok(1)
    }
}

fn or_dash(id: Option<&levelmerge::NodeId>) -> String {
    id.map_or_else(|| "-".to_owned(), ToString::to_string)
}

/// One line per change, grouped by node.
fn change_lines(version: &LevelGraph, diff: &DiffResult) -> Vec<String> {
    let mut lines = Vec::new();
    for (id, class) in &diff.classes {
        match class {
            ChangeClass::Unchanged => {}
            ChangeClass::Deleted => lines.push(format!("delete {id}")),
            ChangeClass::Added => {
                let kind = version.node(id).map_or("", |n| n.kind.as_str());
                lines.push(format!("add {id} {kind} under {}", or_dash(version.direct_parent(id))));
            }
            ChangeClass::Modified => {
                let delta = &diff.deltas[id];
                if !delta.intrinsic {
                    lines.push(format!("propagate {id}"));
                    continue;
                }
                if let Some(r) = &delta.reparent {
                    lines.push(format!("reparent {id} {} -> {}", or_dash(r.from.as_ref()), or_dash(r.to.as_ref())));
                }
                for (key, value) in &delta.property_sets {
                    lines.push(format!("set {id} {key} = {value}"));
                }
                for key in &delta.property_removals {
                    lines.push(format!("unset {id} {key}"));
                }
                for (parent, dep) in &delta.dependency_kind_changes {
                    lines.push(format!("retype {parent} -> {id} {dep}"));
                }
            }
        }
    }
    let reparented = |e: &levelmerge::Edge| {
        e.dependency == levelmerge::Dependency::Direct
            && diff.deltas.get(&e.child).is_some_and(|d| d.reparent.is_some())
    };
    for e in &diff.added_edges {
        if diff.class(&e.child) == Some(ChangeClass::Modified) && !reparented(e) {
            lines.push(format!("link {} -> {} {}", e.parent, e.child, e.dependency));
        }
    }
    for e in &diff.removed_edges {
        if diff.class(&e.child) == Some(ChangeClass::Modified) && !reparented(e) {
            lines.push(format!("unlink {} -> {} {}", e.parent, e.child, e.dependency));
        }
    }
    lines
}

pub fn diff(ancestor: &Path, version: &Path) -> Result<u8> {
    let (anc, ver) = (load(ancestor)?, load(version)?);
    let result = classify(&anc, &ver)?;
    let stats = diff_stats(&result);
    println!(
        "{} added, {} deleted, {} modified",
        stats.added,
        stats.deleted,
        stats.modified_intrinsic + stats.modified_propagated
    );
    for line in change_lines(&ver, &result) {
        println!("{line}");
    }
    println!("{} edited nodes", stats.total_edited);
    Ok(if result.is_identity() { 0 } else { 1 })
}

fn run_merge(config: &Config, policy: &MergePolicy, paths: [&Path; 3]) -> Result<MergeOutcome> {
    let [anc, mine, theirs] = paths.map(load);
    let merger = Merger::new(policy.clone()).with_assets(config.asset_merger()?);
    let mut store = config.blob_store();
    Ok(merger.merge(&anc?, &mine?, &theirs?, &mut store)?)
}

pub fn merge(
    config: &Config,
    policy: &MergePolicy,
    paths: [&Path; 3],
    output: Option<&Path>,
    report_path: Option<&Path>,
) -> Result<u8> {
    let outcome = run_merge(config, policy, paths)?;
    let mut report = MergeReport::from_outcome(&outcome, policy.resolution);
    if let Some(user) = &config.user {
        report = report.with_user(user.name.clone(), user.color.clone());
    }
    let merged = serialize_graph(&outcome.merged);
    match output {
        Some(path) => write_atomically(path, &merged)?,
        None => std::io::stdout().write_all(merged.as_bytes())?,
    }
    if let Some(path) = report_path {
        write_atomically(path, &report.to_text())?;
    }
    let unresolved = outcome.unresolved().count();
    eprintln!(
        "{} conflicts ({unresolved} unresolved), {} dropped edits, {} cycle edges removed",
        outcome.conflicts.len(),
        outcome.dropped.len(),
        outcome.removed_cycle_edges.len()
    );
    for c in outcome.unresolved() {
        eprintln!("conflict: {}", c.signature());
    }
    Ok(if unresolved > 0 { 1 } else { 0 })
}

pub fn stats(config: &Config, policy: &MergePolicy, paths: [&Path; 3]) -> Result<u8> {
    let s = run_merge(config, policy, paths)?.stats;
    println!(
        "{} {} {} {} {} {} {:.6}",
        s.ancestor_nodes,
        s.ancestor_edges,
        s.diff_a_edited,
        s.diff_b_edited,
        s.merged_nodes,
        s.merged_edges,
        s.wall_time.as_secs_f64()
    );
    Ok(0)
}
