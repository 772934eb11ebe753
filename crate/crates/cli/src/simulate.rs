use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Result};
use clap::Args;
use rayon::prelude::*;

use levelmerge::graph::validate;
use levelmerge::sim::{check_scenario, generate, generate_scaled, ScalePreset, SizeParams};
use levelmerge::{merge3, MergePolicy};

use crate::config::Config;
use crate::PolicyArg;

#[derive(Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    count: u64,
    /// room, planets, lab, vikings, or custom (small random levels).
    #[arg(long, default_value = "custom")]
    size: String,
    /// Policy for preset runs and for the scenario itself; custom runs check all three.
    #[arg(long, value_enum)]
    policy: Option<PolicyArg>,
    /// Tab-separated results, one row per scenario.
    #[arg(long)]
    results: Option<PathBuf>,
    #[arg(long, default_value_t = 12)]
    nodes: usize,
    /// Defaults to the spanning tree plus a quarter as many indirect edges.
    #[arg(long)]
    edges: Option<usize>,
    #[arg(long, default_value_t = 4)]
    ops: usize,
}

struct Row {
    seed: u64,
    pass: bool,
    fields: String,
    detail: String,
}

fn custom(seed: u64, params: &SizeParams, policy: &MergePolicy) -> Row {
    let scenario = match generate(seed, params) {
        Ok(mut s) => {
            s.policy = policy.clone();
            s
        }
        Err(e) => return Row { seed, pass: false, fields: "0\t0".into(), detail: e.to_string() },
    };
    let verdict = check_scenario(&scenario, None);
    let detail = verdict.violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ");
    Row {
        seed,
        pass: verdict.is_ok(),
        fields: format!("{}\t{}", verdict.conflicts, verdict.removed_cycle_edges),
        detail,
    }
}

fn scaled(seed: u64, preset: ScalePreset, policy: &MergePolicy) -> Row {
    let t = preset.targets();
    let fail = |detail: String| Row { seed, pass: false, fields: "0\t0\t0".into(), detail };
    let scenario = match generate_scaled(seed, &t) {
        Ok(s) => s,
        Err(e) => return fail(e.to_string()),
    };
    let (a, b) = match scenario.versions() {
        Ok(v) => v,
        Err(e) => return fail(e.to_string()),
    };
    let start = Instant::now();
    let out = match merge3(&scenario.base, &a, &b, policy) {
        Ok(o) => o,
        Err(e) => return fail(e.to_string()),
    };
    let seconds = start.elapsed().as_secs_f64();
    let near = |got: usize, want: usize| got.abs_diff(want) as f64 <= want as f64 * 0.1;
    let mut problems = Vec::new();
    if !validate(&out.merged).is_valid() {
        problems.push("invalid merge".to_owned());
    }
    if !near(out.stats.merged_nodes, t.merged_nodes) || !near(out.stats.merged_edges, t.merged_edges) {
        problems.push(format!(
            "merged {}/{} outside 10% of {}/{}",
            out.stats.merged_nodes, out.stats.merged_edges, t.merged_nodes, t.merged_edges
        ));
    }
    Row {
        seed,
        pass: problems.is_empty(),
        fields: format!("{}\t{}\t{seconds:.6}", out.stats.merged_nodes, out.stats.merged_edges),
        detail: problems.join("; "),
    }
}

pub fn run(config: &Config, args: &SimulateArgs) -> Result<u8> {
    let policy = config.policy(args.policy.map(Into::into));
    let seeds: Vec<u64> = (0..args.count).map(|i| args.seed.wrapping_add(i)).collect();
    let (header, rows): (&str, Vec<Row>) = if args.size == "custom" {
        let mut params = SizeParams::small(args.nodes, args.ops);
        if let Some(e) = args.edges {
            params.edges = e;
        }
        ("conflicts\tcycle_edges", seeds.par_iter().map(|&s| custom(s, &params, &policy)).collect())
    } else {
        let Some(preset) = ScalePreset::parse(&args.size) else {
            bail!("unknown size `{}` (room, planets, lab, vikings or custom)", args.size);
        };
        ("merged_nodes\tmerged_edges\tseconds", seeds.par_iter().map(|&s| scaled(s, preset, &policy)).collect())
    };

    let failed: Vec<&Row> = rows.iter().filter(|r| !r.pass).collect();
    for r in &failed {
        println!("seed {} failed: {}", r.seed, r.detail);
    }
    println!(
        "{} scenarios ({}), {} passed, {} failed",
        rows.len(),
        args.size,
        rows.len() - failed.len(),
        failed.len()
    );
    if let Some(path) = &args.results {
        let mut out = format!("seed\tstatus\t{header}\tdetail\n");
        for r in &rows {
            let status = if r.pass { "pass" } else { "fail" };
            let _ = writeln!(out, "{}\t{status}\t{}\t{}", r.seed, r.fields, r.detail);
        }
        std::fs::write(path, out)?;
    }
    Ok(if failed.is_empty() { 0 } else { 1 })
}
