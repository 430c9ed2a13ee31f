//! Command-line front end for the poisoning experiments.
//!
//! Exit codes: 0 on success, 1 for configuration errors (bad flags, invalid
//! or inconsistent config, missing files), 2 for failures at run time.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use linkpoison::attack::AttackMode;
use linkpoison::baselines::BaselineKind;
use linkpoison::experiment::{cmd_attack, cmd_baseline, cmd_evaluate, cmd_stats, cmd_sweep, ExperimentConfig, LoadedConfig};
use linkpoison::Error;

#[derive(Parser, Debug)]
#[command(name = "linkpoison", version, about = "Meta-gradient poisoning attacks on link prediction")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `[output] dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Sets the split, attack and victim seeds.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Attack differentiation mode; overrides `[attack] mode`.
    #[arg(long, global = true, value_parser = parse_mode)]
    mode: Option<AttackMode>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the meta-gradient attack and write the poisoned graph.
    Attack,
    /// Train victims on clean and poisoned graphs and report metric drops.
    Evaluate {
        /// Poisoned edge list over the dataset's nodes.
        #[arg(long)]
        poisoned: PathBuf,
        /// Clean edge list; defaults to the configured dataset.
        #[arg(long)]
        clean: Option<PathBuf>,
    },
    /// Run every scheme and baseline over the configured grid.
    Sweep,
    /// Structural statistics of the dataset and optionally a poisoned copy.
    Stats {
        #[arg(long)]
        poisoned: Option<PathBuf>,
    },
    /// Run a reference perturbation at the attack budget.
    Baseline {
        #[arg(long, value_parser = parse_baseline)]
        kind: BaselineKind,
    },
}

fn parse_mode(s: &str) -> Result<AttackMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_baseline(s: &str) -> Result<BaselineKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn load(common: &Common) -> Result<LoadedConfig, Error> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config is required".into()))?;
    let mut lc = ExperimentConfig::load(path)?;
    if let Some(seed) = common.seed {
        lc.config.override_seed(seed);
    }
    if let Some(mode) = common.mode {
        lc.config.attack.mode = mode;
    }
    if let Some(out) = &common.out {
        lc.config.output.dir = out.clone();
    }
    lc.config.validate()?;
    Ok(lc)
}

fn run(cli: Cli) -> Result<(), Error> {
    let lc = load(&cli.common)?;
    match cli.command {
        Command::Attack => {
            let s = cmd_attack(&lc)?;
            println!(
                "{} of {} flips; edges {} -> {}; written to {}",
                s.edits.len(),
                s.budget,
                s.clean_edges,
                s.poisoned_edges,
                s.dir.display()
            );
        }
        Command::Baseline { kind } => {
            let s = cmd_baseline(&lc, kind)?;
            println!(
                "{kind}: {} flips (budget {}); edges {} -> {}; written to {}",
                s.edits.len(),
                s.budget,
                s.clean_edges,
                s.poisoned_edges,
                s.dir.display()
            );
        }
        Command::Evaluate { poisoned, clean } => {
            let reports = cmd_evaluate(&lc, &poisoned, clean.as_deref())?;
            println!("{:<10}{:<8}{:>10}{:>10}{:>10}", "model", "metric", "clean", "poisoned", "drop");
            for r in reports {
                println!(
                    "{:<10}{:<8}{:>10.4}{:>10.4}{:>10.4}",
                    r.model, r.metric, r.clean, r.poisoned, r.delta
                );
            }
        }
        Command::Sweep => print!("{}", cmd_sweep(&lc)?.csv),
        Command::Stats { poisoned } => print!("{}", cmd_stats(&lc, poisoned.as_deref())?.table()),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 1 } else { 2 })
        }
    }
}
