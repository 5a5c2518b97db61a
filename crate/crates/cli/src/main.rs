use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use tmix_cli::config::Command;
use tmix_cli::recipes;
use tmix_cli::run::{resolve_config, run, Options};

#[derive(Parser)]
#[command(name = "tmix", version, about = "Teacher-mixture fairness experiments: replica theory, simulation and mitigation sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Replica prediction at the base point.
    Solve(RunArgs),
    /// Finite-size training at the base point.
    Simulate(RunArgs),
    /// Theory and simulation side by side, over the config axes if any.
    Compare(RunArgs),
    /// Grid over the config axes.
    Sweep(RunArgs),
    /// Loss reweighing grid over (w_group_plus, w_label_one).
    Reweigh(RunArgs),
    /// Coupled students over the coupling strength.
    Couple(RunArgs),
    /// Mitigation grid against membership fidelity.
    Eta(RunArgs),
    /// Names of the shipped recipes.
    ListRecipes {
        /// Also print each recipe's command and description.
        #[arg(long)]
        long: bool,
    },
    /// Print a shipped recipe, or write it to a file.
    Recipe {
        name: String,
        #[arg(long)]
        write: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Config file, or the name of a shipped recipe.
    #[arg(short, long)]
    config: String,
    /// Output directory (default: tmix-out/<config name>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, env = "TMIX_WORKERS")]
    workers: Option<usize>,
    /// Exit successfully even when some cells failed or did not converge.
    #[arg(long)]
    allow_partial: bool,
    /// Simulation seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Simulation dimension (overrides the config).
    #[arg(long)]
    d: Option<usize>,
    /// Also write cells.json with full per-cell diagnostics.
    #[arg(long)]
    diagnostics: bool,
}

fn execute(command: Command, args: RunArgs) -> Result<ExitCode> {
    let (cfg, source) = resolve_config(&args.config)?;
    let opts = Options {
        out: args.out,
        workers: args.workers,
        allow_partial: args.allow_partial,
        seed: args.seed,
        d: args.d,
        diagnostics: args.diagnostics,
    };
    let outcome = run(command, cfg, &source, &opts)?;
    eprintln!(
        "{}: {} cells, {} failed, {} not converged -> {}",
        command.name(),
        outcome.cells,
        outcome.failures,
        outcome.unconverged,
        outcome.out_dir.display()
    );
    if outcome.all_converged() || opts.allow_partial {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("some cells did not converge; rerun with --allow-partial to accept");
        Ok(ExitCode::from(2))
    }
}

fn list_recipes(long: bool) -> Result<()> {
    for name in recipes::names() {
        if long {
            let cfg = recipes::load(name)?;
            let cmd = cfg.command.map(Command::name).unwrap_or("-");
            println!("{name}\t{cmd}\t{}", cfg.description.unwrap_or_default());
        } else {
            println!("{name}");
        }
    }
    Ok(())
}

fn show_recipe(name: &str, write: Option<PathBuf>) -> Result<()> {
    let text = recipes::source(name).with_context(|| format!("no recipe named `{name}`"))?;
    match write {
        Some(path) => std::fs::write(&path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> Result<ExitCode> {
    match Cli::parse().command {
        Sub::Solve(a) => execute(Command::Solve, a),
        Sub::Simulate(a) => execute(Command::Simulate, a),
        Sub::Compare(a) => execute(Command::Compare, a),
        Sub::Sweep(a) => execute(Command::Sweep, a),
        Sub::Reweigh(a) => execute(Command::Reweigh, a),
        Sub::Couple(a) => execute(Command::Couple, a),
        Sub::Eta(a) => execute(Command::Eta, a),
        Sub::ListRecipes { long } => list_recipes(long).map(|_| ExitCode::SUCCESS),
        Sub::Recipe { name, write } => show_recipe(&name, write).map(|_| ExitCode::SUCCESS),
    }
}
