//! Acceptance suite: one line per criterion, non-zero exit if any fails.

#[path = "../../core/tests/support/cycles.rs"]
mod cycles;
#[path = "../../core/tests/support/docs.rs"]
mod docs;
#[path = "../../core/tests/support/oracle.rs"]
mod oracle;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use proptest::test_runner::{Config as RunnerConfig, TestRunner};
use rayon::prelude::*;

use levelmerge::format::{parse, MergeReport};
use levelmerge::graph::{AssetId, Digest};
use levelmerge::merge::{ConflictKind, DroppedChange};
use levelmerge::sim::{check_scenario, generate, generate_scaled, ScalePreset, Scenario, SizeParams};
use levelmerge::{merge3, LevelGraph, MergePolicy, NodeId, Resolution};

type Outcome = Result<String, String>;

fn ensure(condition: bool, message: impl FnOnce() -> String) -> Result<(), String> {
    if condition {
        Ok(())
    } else {
        Err(message())
    }
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

fn load(path: &Path) -> Result<LevelGraph, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse(&text).map(|d| d.graph).map_err(|e| format!("{}: {e}", path.display()))
}

fn levelmerge(args: &[&str], dir: &Path) -> Result<(i32, String), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_levelmerge"))
        .args(args)
        .current_dir(dir)
        .env_remove("LEVELMERGE_CONFIG")
        .output()
        .map_err(|e| e.to_string())?;
    Ok((out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stderr).into_owned()))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn room_fixture() -> Outcome {
    let [o, a, b, want] = ["ancestor", "a", "b", "expected"].map(|n| load(&fixture(&format!("room/{n}.lvl"))));
    let (o, a, b, want) = (o?, a?, b?, want?);
    let start = Instant::now();
    let out = merge3(&o, &a, &b, &MergePolicy::default()).map_err(|e| e.to_string())?;
    let took = start.elapsed();
    ensure(out.conflicts.is_empty(), || format!("{} conflicts", out.conflicts.len()))?;
    for id in ["painting", "blinds", "dollhouse", "chimney_smoke"] {
        ensure(out.merged.contains(&NodeId::from(id)), || format!("{id} missing"))?;
    }
    ensure(out.merged.direct_parent(&NodeId::from("bunny")) == Some(&NodeId::from("dollhouse")), || {
        "bunny not under dollhouse".into()
    })?;
    ensure(!out.merged.contains(&NodeId::from("drawers")), || "drawers survived".into())?;
    ensure(out.merged == want, || "differs from expected.lvl".into())?;
    ensure(took < Duration::from_millis(100), || format!("took {took:?}"))?;
    Ok(format!("0 conflicts, matches expected, {took:?}"))
}

fn planets_fixture() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let [o, a, b] = ["ancestor", "a", "b"].map(|n| fixture(&format!("planets/{n}.lvl")));
    let (out, report) = (dir.path().join("out.lvl"), dir.path().join("report"));
    let mut notes = Vec::new();
    for (policy, code, expected) in [
        ("manual", 1, None),
        ("prefer-a", 0, Some("planets/expected-prefer-a.lvl")),
        ("prefer-b", 0, Some("planets/expected-prefer-b.lvl")),
    ] {
        let args = ["merge", s(&o), s(&a), s(&b), "--policy", policy, "-o", s(&out), "--report", s(&report)];
        let (got, stderr) = levelmerge(&args, dir.path())?;
        ensure(got == code, || format!("{policy}: exit {got}, wanted {code}: {stderr}"))?;
        let text = fs::read_to_string(&report).map_err(|e| e.to_string())?;
        let r = MergeReport::parse(&text).map_err(|e| e.to_string())?;
        ensure(r.conflicts.len() == 1 && matches!(r.conflicts[0].kind, ConflictKind::DeleteModify { .. }), || {
            format!("{policy}: conflicts {:?}", r.conflicts)
        })?;
        match expected {
            None => ensure(r.has_unresolved() && r.dropped.is_empty(), || format!("{policy}: not left unresolved"))?,
            Some(path) => {
                ensure(r.dropped.len() == 1, || format!("{policy}: {} dropped edits", r.dropped.len()))?;
                ensure(load(&out)? == load(&fixture(path))?, || format!("{policy}: differs from {path}"))?;
            }
        }
        notes.push(format!("{policy}={got}"));
    }
    Ok(notes.join(" "))
}

fn safety_suite() -> Outcome {
    let failures: Vec<String> = (0..10_000u64)
        .into_par_iter()
        .filter_map(|seed| {
            let params = SizeParams::small(2 + (seed % 29) as usize, (seed % 7) as usize);
            let verdict = match generate(seed, &params) {
                Ok(scenario) => check_scenario(&scenario, None),
                Err(e) => return Some(format!("seed {seed}: {e}")),
            };
            (!verdict.is_ok()).then(|| format!("seed {seed}: {}", verdict.violations[0]))
        })
        .collect();
    ensure(failures.is_empty(), || format!("{} failures, first {}", failures.len(), failures[0]))?;
    Ok("10000 scenarios, 3 policies each, no violations".into())
}

fn oracle_sweep() -> Outcome {
    let base = oracle::sweep_base();
    let (menu_a, menu_b) = (oracle::op_menu(&base, "a"), oracle::op_menu(&base, "b"));
    let pairs: Vec<(usize, usize)> = (0..menu_a.len()).flat_map(|i| (0..menu_b.len()).map(move |j| (i, j))).collect();
    let failures: Vec<String> = pairs
        .par_iter()
        .filter_map(|&(i, j)| {
            let scenario = Scenario {
                seed: (i * menu_b.len() + j) as u64,
                base: base.clone(),
                script_a: vec![menu_a[i].clone()],
                script_b: vec![menu_b[j].clone()],
                policy: MergePolicy::default(),
            };
            let verdict = check_scenario(&scenario, Some(&oracle::BruteForceOracle));
            (!verdict.is_ok()).then(|| format!("[{}] x [{}]: {}", menu_a[i], menu_b[j], verdict.violations[0]))
        })
        .collect();
    ensure(failures.is_empty(), || format!("{} of {} pairs, first {}", failures.len(), pairs.len(), failures[0]))?;
    Ok(format!("{} op pairs agree", pairs.len()))
}

fn cycle_repair() -> Outcome {
    let policies = [Resolution::Manual, Resolution::PreferA, Resolution::PreferB];
    let (mut cyclic, mut seed) = (0, 0u64);
    while cyclic < 1000 {
        ensure(seed < 20_000, || format!("only {cyclic} cyclic merges generated"))?;
        if let Some(s) = cycles::cyclic_scenario(seed) {
            let policy = MergePolicy::new(policies[(seed % 3) as usize]);
            if cycles::check_cycle_merge(&s, &policy).map_err(|e| format!("seed {seed}: {e}"))? {
                cyclic += 1;
            }
        }
        seed += 1;
    }
    Ok(format!("1000 cyclic merges repaired ({seed} generated)"))
}

fn performance() -> Outcome {
    let mut notes = Vec::new();
    for (preset, limit) in [(ScalePreset::Lab, 2.0), (ScalePreset::Planets, 1.5)] {
        let t = preset.targets();
        let scenario = generate_scaled(1, &t).map_err(|e| e.to_string())?;
        let (a, b) = scenario.versions().map_err(|e| e.to_string())?;
        let start = Instant::now();
        let out = merge3(&scenario.base, &a, &b, &MergePolicy::default()).map_err(|e| e.to_string())?;
        let secs = start.elapsed().as_secs_f64();
        ensure(out.stats.diff_a_edited == t.diff_a && out.stats.diff_b_edited == t.diff_b, || {
            format!("{}: diffs {}/{}", preset.name(), out.stats.diff_a_edited, out.stats.diff_b_edited)
        })?;
        ensure(secs < limit, || format!("{} took {secs:.3}s (limit {limit}s)", preset.name()))?;
        notes.push(format!("{} {}n/{}e {secs:.3}s", preset.name(), t.ancestor_nodes, t.ancestor_edges));
    }
    Ok(notes.join(", "))
}

fn git(dir: &Path, args: &[&str]) -> Result<i32, String> {
    let out = Command::new("git")
        .args(args)
        .current_dir(dir)
        .env("GIT_CONFIG_NOSYSTEM", "1")
        .env("HOME", dir)
        .output()
        .map_err(|e| format!("git: {e}"))?;
    Ok(out.status.code().unwrap_or(-1))
}

fn git_ok(dir: &Path, args: &[&str]) -> Result<(), String> {
    let code = git(dir, args)?;
    ensure(code == 0, || format!("git {} exited {code}", args.join(" ")))
}

/// Commits `ancestor`, then `mine` on main and `theirs` on a side branch,
/// and merges the side branch. Returns git's exit code and the driver's.
fn git_merge(root: &Path, set: &str, policy: &str, report: &Path) -> Result<(i32, i32, PathBuf), String> {
    let repo = root.join(set);
    fs::create_dir_all(&repo).map_err(|e| e.to_string())?;
    let status = root.join(format!("{set}.status"));
    let driver = format!(
        "{} merge-driver %O %A %B --policy {policy} --report {}; s=$?; echo $s > {}; exit $s",
        env!("CARGO_BIN_EXE_levelmerge"),
        s(report),
        s(&status)
    );
    git_ok(&repo, &["init", "-q", "-b", "main"])?;
    for (k, v) in [("user.name", "dev"), ("user.email", "dev@example.com"), ("merge.levelmerge.driver", driver.as_str())] {
        git_ok(&repo, &["config", k, v])?;
    }
    fs::write(repo.join(".gitattributes"), "*.lvl merge=levelmerge\n").map_err(|e| e.to_string())?;
    let level = repo.join("level.lvl");
    let copy = |name: &str| fs::copy(fixture(&format!("{set}/{name}.lvl")), &level).map_err(|e| e.to_string());
    copy("ancestor")?;
    git_ok(&repo, &["add", "."])?;
    git_ok(&repo, &["commit", "-qm", "ancestor"])?;
    git_ok(&repo, &["checkout", "-qb", "theirs"])?;
    copy("b")?;
    git_ok(&repo, &["commit", "-qam", "theirs"])?;
    git_ok(&repo, &["checkout", "-q", "main"])?;
    copy("a")?;
    git_ok(&repo, &["commit", "-qam", "mine"])?;
    let code = git(&repo, &["merge", "-q", "--no-edit", "theirs"])?;
    let driver_code = fs::read_to_string(&status)
        .map_err(|_| "merge driver was not invoked".to_owned())?
        .trim()
        .parse()
        .map_err(|e| format!("{e}"))?;
    Ok((code, driver_code, level))
}

fn merge_driver() -> Outcome {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let report = root.path().join("room.report");
    let (code, driver, level) = git_merge(root.path(), "room", "manual", &report)?;
    ensure(code == 0 && driver == 0, || format!("clean merge: git {code}, driver {driver}"))?;
    ensure(load(&level)? == load(&fixture("room/expected.lvl"))?, || "merged level differs".into())?;

    let report = root.path().join("planets.report");
    let (code, driver, level) = git_merge(root.path(), "planets", "manual", &report)?;
    ensure(driver == 1 && code != 0, || format!("conflicting merge: git {code}, driver {driver}"))?;
    load(&level)?;
    let text = fs::read_to_string(&report).map_err(|e| e.to_string())?;
    let r = MergeReport::parse(&text).map_err(|e| e.to_string())?;
    ensure(r.conflicts.iter().any(|c| c.signature().subject == "planet_front"), || {
        "report does not name planet_front".into()
    })?;
    Ok("clean merge exit 0, conflicting merge exit 1 with parseable level and report".into())
}

fn format_round_trip() -> Outcome {
    let mut runner = TestRunner::new(RunnerConfig { cases: 1000, failure_persistence: None, ..RunnerConfig::default() });
    runner
        .run(&docs::document(), |g| {
            docs::round_trip(&g).map_err(proptest::test_runner::TestCaseError::fail)
        })
        .map_err(|e| e.to_string())?;
    Ok("1000 documents round-trip".into())
}

fn code_gate() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let blobs = dir.path().join("blobs");
    fs::create_dir_all(&blobs).map_err(|e| e.to_string())?;
    fs::write(
        dir.path().join(".levelmerge.toml"),
        "[assets]\nstore = \"blobs\"\n[assets.validators]\ncode = \"sh -n\"\n",
    )
    .map_err(|e| e.to_string())?;
    let put = |content: &[u8]| {
        let d = Digest::of(content);
        fs::write(blobs.join(d.as_str()), content).map(|_| d).map_err(|e| e.to_string())
    };
    let original = fs::read_to_string(fixture("room/ancestor.lvl")).map_err(|e| e.to_string())?;
    let old = put(b"lamp script")?;
    ensure(original.contains(old.as_str()), || "fixture digest mismatch".into())?;
    fs::write(dir.path().join("o.lvl"), &original).map_err(|e| e.to_string())?;
    fs::write(dir.path().join("b.lvl"), &original).map_err(|e| e.to_string())?;

    let mut notes = Vec::new();
    for (label, content, admitted) in [
        ("failing", &b"if [ -n \"$x\" ]; then\n  echo on\n"[..], false),
        ("passing", &b"echo flicker\n"[..], true),
    ] {
        let new = put(content)?;
        fs::write(dir.path().join("a.lvl"), original.replace(old.as_str(), new.as_str())).map_err(|e| e.to_string())?;
        let report = format!("{label}.report");
        let (code, stderr) =
            levelmerge(&["merge", "o.lvl", "a.lvl", "b.lvl", "-o", "m.lvl", "--report", &report], dir.path())?;
        ensure(code == 0, || format!("{label}: exit {code}: {stderr}"))?;
        let merged = load(&dir.path().join("m.lvl"))?;
        let digest = &merged.assets()[&AssetId::from("scripts/flicker.lua")].digest;
        let r = MergeReport::parse(&fs::read_to_string(dir.path().join(&report)).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        let rejected = r
            .dropped
            .iter()
            .any(|d| matches!(&d.change, DroppedChange::Asset { rejected: Some(_), entry: Some(e), .. } if e.digest == new));
        if admitted {
            ensure(*digest == new && r.dropped.is_empty(), || format!("{label}: blob not admitted"))?;
        } else {
            ensure(*digest == old, || format!("{label}: failing blob admitted"))?;
            ensure(rejected, || format!("{label}: no dropped edit recorded"))?;
        }
        notes.push(format!("{label} {}", if admitted { "admitted" } else { "rejected" }));
    }
    Ok(notes.join(", "))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("room fixture merge", room_fixture),
        ("planets fixture policies", planets_fixture),
        ("safety suite", safety_suite),
        ("oracle equivalence", oracle_sweep),
        ("cycle repair", cycle_repair),
        ("performance", performance),
        ("merge driver", merge_driver),
        ("format round-trip", format_round_trip),
        ("code-asset gate", code_gate),
    ];
    let mut failed = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(note) => println!("criterion {} {name}: PASS ({note}) [{secs:.1}s]", n + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({why}) [{secs:.1}s]", n + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
