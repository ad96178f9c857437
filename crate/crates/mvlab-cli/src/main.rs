//! `mvlab` — run reproducible particle-system experiments from JSON configs.
//!
//! One subcommand per experiment kind plus `rerun`.  Every run writes
//! `<outdir>/<kind>-<confighash>/{results.csv, manifest.json}`; the manifest
//! alone reproduces the CSV byte-for-byte.  Exit codes: 0 success, 2 config
//! error, 3 regime refusal, 4 numeric or I/O failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mvlab_cli::config::{parse_config, ExperimentConfig, Kind};
use mvlab_cli::runner::{rerun, run, RunError, RunOptions};

#[derive(Parser)]
#[command(name = "mvlab", version, about = "Interacting-particle experiment runner")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (strict JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = machine default; output bytes are unaffected).
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Suppress progress output.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct RerunArgs {
    /// Manifest of a previous run.
    #[arg(long)]
    manifest: PathBuf,
    /// Redirect output (defaults to the manifest's outdir).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Record trajectory observables and reference distances on an (N, n) grid.
    Simulate(RunArgs),
    /// Iterate the measure map to its fixed point and compare to the invariant oracle.
    FixedPoint(RunArgs),
    /// Mean W1 between the particle system and the limit flow over an (N, n) grid.
    PocSweep(RunArgs),
    /// Sup over time of the mean W1, per population size.
    UniformSweep(RunArgs),
    /// Empirical tail probabilities against the solved concentration curves.
    Tails(RunArgs),
    /// Time-averaged pair-moment factorization defect across population sizes.
    Chaos(RunArgs),
    /// Evaluate the concentration curves on an (N, ε) grid without simulating.
    Bounds(RunArgs),
    /// Audit model assumptions and print the regime report.
    Validate(RunArgs),
    /// Re-execute a persisted manifest (byte-identical results).
    Rerun(RerunArgs),
}

impl Cmd {
    fn kind(&self) -> Option<Kind> {
        match self {
            Cmd::Simulate(_) => Some(Kind::Simulate),
            Cmd::FixedPoint(_) => Some(Kind::FixedPoint),
            Cmd::PocSweep(_) => Some(Kind::PocSweep),
            Cmd::UniformSweep(_) => Some(Kind::UniformSweep),
            Cmd::Tails(_) => Some(Kind::Tails),
            Cmd::Chaos(_) => Some(Kind::Chaos),
            Cmd::Bounds(_) => Some(Kind::Bounds),
            Cmd::Validate(_) => Some(Kind::Validate),
            Cmd::Rerun(_) => None,
        }
    }
}

fn load_for(kind: Kind, args: &RunArgs) -> Result<ExperimentConfig, RunError> {
    let mut cfg = parse_config(&args.config)?;
    if cfg.kind != kind {
        return Err(RunError::Config(mvlab_cli::config::ConfigError::Schema {
            origin: args.config.display().to_string(),
            msg: format!(
                "config kind `{}` does not match subcommand `{kind}`",
                cfg.kind
            ),
        }));
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.outdir = out.display().to_string();
    }
    Ok(cfg)
}

fn dispatch(cmd: Cmd) -> Result<(), RunError> {
    match &cmd {
        Cmd::Rerun(args) => {
            let opts = RunOptions {
                threads: args.threads,
                quiet: args.quiet,
            };
            rerun(&args.manifest, args.out.as_deref(), &opts)?;
            Ok(())
        }
        Cmd::Simulate(args)
        | Cmd::FixedPoint(args)
        | Cmd::PocSweep(args)
        | Cmd::UniformSweep(args)
        | Cmd::Tails(args)
        | Cmd::Chaos(args)
        | Cmd::Bounds(args)
        | Cmd::Validate(args) => {
            let kind = cmd.kind().expect("run subcommand");
            let cfg = load_for(kind, args)?;
            let opts = RunOptions {
                threads: args.threads,
                quiet: args.quiet,
            };
            run(&cfg, &opts)?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
