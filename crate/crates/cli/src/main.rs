mod commands;
mod config;
mod simulate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use levelmerge::Resolution;

/// Three-way diff and merge for level files.
#[derive(Parser)]
#[command(name = "levelmerge", version)]
struct Cli {
    /// Config file; defaults to $LEVELMERGE_CONFIG, then the nearest .levelmerge.toml.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Manual,
    PreferA,
    PreferB,
}

impl From<PolicyArg> for Resolution {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Manual => Resolution::Manual,
            PolicyArg::PreferA => Resolution::PreferA,
            PolicyArg::PreferB => Resolution::PreferB,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check a level: acyclic, rooted, reachable, consistent references.
    Validate { path: PathBuf },
    /// Classify the changes of a version against its ancestor.
    Diff { ancestor: PathBuf, version: PathBuf },
    /// Merge two versions of a level.
    Merge {
        ancestor: PathBuf,
        mine: PathBuf,
        theirs: PathBuf,
        #[arg(long, value_enum)]
        policy: Option<PolicyArg>,
        /// Merged level; standard output when absent.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Machine-readable merge report.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Git merge driver: `levelmerge merge-driver %O %A %B`. Writes the
    /// merge over the second path.
    MergeDriver {
        ancestor: PathBuf,
        current: PathBuf,
        other: PathBuf,
        #[arg(long, value_enum)]
        policy: Option<PolicyArg>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// One row: ancestor nodes/edges, edited nodes per branch, merged nodes/edges, seconds.
    Stats {
        ancestor: PathBuf,
        mine: PathBuf,
        theirs: PathBuf,
        #[arg(long, value_enum)]
        policy: Option<PolicyArg>,
    },
    /// Run seeded random merges and check the merge laws.
    Simulate(simulate::SimulateArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match config::Config::load(cli.config.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("levelmerge: {e:#}");
            return ExitCode::from(2);
        }
    };
    let policy = |p: Option<PolicyArg>| config.policy(p.map(Resolution::from));
    let result = match cli.command {
        Command::Validate { path } => commands::validate(&path),
        Command::Diff { ancestor, version } => commands::diff(&ancestor, &version),
        Command::Merge { ancestor, mine, theirs, policy: p, output, report } => commands::merge(
            &config,
            &policy(p),
            [&ancestor, &mine, &theirs],
            output.as_deref(),
            report.as_deref(),
        ),
        Command::MergeDriver { ancestor, current, other, policy: p, report } => commands::merge(
            &config,
            &policy(p),
            [&ancestor, &current, &other],
            Some(&current),
            report.as_deref(),
        ),
        Command::Stats { ancestor, mine, theirs, policy: p } => {
            commands::stats(&config, &policy(p), [&ancestor, &mine, &theirs])
        }
        Command::Simulate(args) => simulate::run(&config, &args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("levelmerge: {e:#}");
            ExitCode::from(2)
        }
    }
}
