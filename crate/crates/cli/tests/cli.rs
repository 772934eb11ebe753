use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use levelmerge::format::{parse, serialize_graph, MergeReport};
use levelmerge::sim::{generate, generate_scaled, ScalePreset, SizeParams};

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

fn run_in(dir: &Path, args: &[&str], env: &[(&str, &str)]) -> Run {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_levelmerge"));
    cmd.args(args).current_dir(dir).env_remove("LEVELMERGE_CONFIG");
    for (k, v) in env {
        cmd.env(k, v);
    }
    let out = cmd.output().unwrap();
    Run {
        code: out.status.code().unwrap(),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn run(args: &[&str]) -> Run {
    let dir = tempfile::tempdir().unwrap();
    run_in(dir.path(), args, &[])
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn validate_exit_codes() {
    assert_eq!(run(&["validate", p(&fixture("room/ancestor.lvl"))]).code, 0);

    let dir = tempfile::tempdir().unwrap();
    let cyclic = dir.path().join("cyclic.lvl");
    fs::write(&cyclic, "level-format 1\nroot r\nnode r Scene\nnode x A\nnode y A\nedge r x direct\nedge x y direct\nedge y x indirect\n").unwrap();
    let r = run(&["validate", p(&cyclic)]);
    assert_eq!(r.code, 1);
    assert!(r.stdout.to_lowercase().contains("cycle"), "{}", r.stdout);

    assert_eq!(run(&["validate", p(&dir.path().join("missing.lvl"))]).code, 2);
    let broken = dir.path().join("broken.lvl");
    fs::write(&broken, "level-format 1\nroot r\nnode r\n").unwrap();
    let r = run(&["validate", p(&broken)]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("3:"), "{}", r.stderr);
}

#[test]
fn diff_lists_changes() {
    let anc = fixture("room/ancestor.lvl");
    let r = run(&["diff", p(&anc), p(&anc)]);
    assert_eq!(r.code, 0);
    assert!(r.stdout.starts_with("0 added, 0 deleted, 0 modified\n"));

    let r = run(&["diff", p(&anc), p(&fixture("room/b.lvl"))]);
    assert_eq!(r.code, 1);
    assert!(r.stdout.contains("reparent bunny"), "{}", r.stdout);
    assert!(r.stdout.contains("delete drawers"));
    assert!(r.stdout.contains("7 edited nodes"));

    let r = run(&["diff", p(&anc), p(&fixture("cycle/ancestor.lvl"))]);
    assert_eq!(r.code, 2);
}

#[test]
fn diff_counts_a_large_branch() {
    let s = generate_scaled(5, &ScalePreset::Planets.targets()).unwrap();
    let (a, _) = s.versions().unwrap();
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("o.lvl"), serialize_graph(&s.base)).unwrap();
    fs::write(dir.path().join("a.lvl"), serialize_graph(&a)).unwrap();
    let r = run_in(dir.path(), &["diff", "o.lvl", "a.lvl"], &[]);
    assert_eq!(r.code, 1);
    assert!(r.stdout.ends_with("545 edited nodes\n"));
}

#[test]
fn identity_merge_returns_canonical_input() {
    let anc = fixture("scene_example.lvl");
    let r = run(&["merge", p(&anc), p(&anc), p(&anc)]);
    assert_eq!(r.code, 0);
    let canonical = serialize_graph(&parse(&fs::read_to_string(&anc).unwrap()).unwrap().graph);
    assert_eq!(r.stdout, canonical);
}

#[test]
fn merge_policies_and_reports() {
    let [o, a, b] = ["ancestor", "a", "b"].map(|n| fixture(&format!("planets/{n}.lvl")));
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report");
    let out = dir.path().join("out.lvl");

    let r = run(&["merge", p(&o), p(&a), p(&b), "-o", p(&out), "--report", p(&report)]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("conflict: delete-modify planet_front a"), "{}", r.stderr);
    let parsed = MergeReport::parse(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(parsed.conflicts.len(), 1);
    assert_eq!(parsed.conflicts[0].kind.tag(), "delete-modify");
    parse(&fs::read_to_string(&out).unwrap()).unwrap();

    let r = run(&["merge", p(&o), p(&a), p(&b), "--policy", "prefer-b", "-o", p(&out), "--report", p(&report)]);
    assert_eq!(r.code, 0);
    let parsed = MergeReport::parse(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(parsed.conflicts.len(), 1);
    assert!(!parsed.has_unresolved());
    assert_eq!(parsed.dropped.len(), 1);

    let first = fs::read(&out).unwrap();
    run(&["merge", p(&o), p(&a), p(&b), "--policy", "prefer-b", "-o", p(&out)]);
    assert_eq!(fs::read(&out).unwrap(), first);
}

#[test]
fn merge_driver_writes_over_the_current_file() {
    let dir = tempfile::tempdir().unwrap();
    let current = dir.path().join("current.lvl");
    fs::copy(fixture("room/a.lvl"), &current).unwrap();
    let r = run(&["merge-driver", p(&fixture("room/ancestor.lvl")), p(&current), p(&fixture("room/b.lvl"))]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let merged = parse(&fs::read_to_string(&current).unwrap()).unwrap().graph;
    let expected = parse(&fs::read_to_string(fixture("room/expected.lvl")).unwrap()).unwrap().graph;
    assert_eq!(merged, expected);

    let before = fs::read(&current).unwrap();
    let r = run(&["merge-driver", p(&dir.path().join("gone.lvl")), p(&current), p(&fixture("room/b.lvl"))]);
    assert_eq!(r.code, 2);
    assert_eq!(fs::read(&current).unwrap(), before);
}

#[test]
fn stats_row() {
    let s = generate(1, &SizeParams { nodes: 79, edges: 84, ..SizeParams::small(79, 0) }).unwrap();
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("o.lvl"), serialize_graph(&s.base)).unwrap();
    let r = run_in(dir.path(), &["stats", "o.lvl", "o.lvl", "o.lvl"], &[]);
    assert_eq!(r.code, 0);
    assert!(r.stdout.starts_with("79 84 0 0 79 84 "), "{}", r.stdout);

    let [o, a, b] = ["ancestor", "a", "b"].map(|n| fixture(&format!("room/{n}.lvl")));
    let r = run(&["stats", p(&o), p(&a), p(&b)]);
    assert!(r.stdout.starts_with("10 10 2 7 13 13 "), "{}", r.stdout);
}

#[test]
fn config_lookup_and_overrides() {
    let [o, a, b] = ["ancestor", "a", "b"].map(|n| fixture(&format!("planets/{n}.lvl")));
    let dir = tempfile::tempdir().unwrap();
    let nested = dir.path().join("levels/space");
    fs::create_dir_all(&nested).unwrap();
    fs::write(dir.path().join(".levelmerge.toml"), "policy = \"prefer-a\"\n[user]\nname = \"ana\"\ncolor = \"red\"\n").unwrap();
    let args = ["merge", p(&o), p(&a), p(&b), "--report", "r.txt"];

    let r = run_in(&nested, &args, &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let report = fs::read_to_string(nested.join("r.txt")).unwrap();
    assert!(report.contains("policy prefer-a"));
    assert!(report.contains("user name ana color red"), "{report}");

    let manual = dir.path().join("manual.toml");
    fs::write(&manual, "policy = \"manual\"\n").unwrap();
    assert_eq!(run_in(&nested, &args, &[("LEVELMERGE_CONFIG", p(&manual))]).code, 1);
    let mut with_flag = args.to_vec();
    with_flag.extend(["--config", p(&manual)]);
    assert_eq!(run_in(&nested, &with_flag, &[]).code, 1);
    with_flag.extend(["--policy", "prefer-b"]);
    assert_eq!(run_in(&nested, &with_flag, &[]).code, 0);

    fs::write(&manual, "policy = \"manual\"\ncolour = 1\n").unwrap();
    let r = run_in(&nested, &args, &[("LEVELMERGE_CONFIG", p(&manual))]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("colour"), "{}", r.stderr);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&["merge", "only-one.lvl"]).code, 2);
    assert_eq!(run(&["frobnicate"]).code, 2);
    assert_eq!(run(&["simulate", "--size", "castle"]).code, 2);
}

#[test]
fn simulate_writes_results() {
    let dir = tempfile::tempdir().unwrap();
    let r = run_in(dir.path(), &["simulate", "--seed", "9", "--count", "40", "--results", "out.tsv"], &[]);
    assert_eq!(r.code, 0, "{}", r.stdout);
    assert!(r.stdout.contains("40 scenarios (custom), 40 passed, 0 failed"));
    let tsv = fs::read_to_string(dir.path().join("out.tsv")).unwrap();
    assert_eq!(tsv.lines().count(), 41);
    assert!(tsv.starts_with("seed\tstatus\t"));

    let r = run_in(dir.path(), &["simulate", "--size", "room", "--count", "2", "--policy", "prefer-a"], &[]);
    assert_eq!(r.code, 0, "{}", r.stdout);
}
