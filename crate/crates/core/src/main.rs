use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use memdiff::config::parse_config;
use memdiff::harness::{emit_report, ScenarioRegistry};
use memdiff::output::read_csv;
use memdiff::plot::{plot_series, PlotKind};
use memdiff::Result;

/// Nonclassical diffusion with fading memory: simulations and estimate checks.
#[derive(Debug, Parser)]
#[command(name = "memdiff", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Single run with energy diagnostics
    Simulate(RunArgs),
    /// Ensemble entry into the absorbing balls
    Absorb(RunArgs),
    /// Post-transient spectral tail energies
    Tail(RunArgs),
    /// Continuous dependence under small perturbations
    Depend(RunArgs),
    /// Comparison with the linear closed form
    Oracle(RunArgs),
    /// Kernel hypotheses and quadrature
    CheckKernel(RunArgs),
    /// Gronwall-type bound on a synthetic inequality
    Gronwall(RunArgs),
    /// Render a CSV table as SVG
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Directory for CSV, SVG, manifest and report files
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Overrides the seed in the config
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    #[arg(long)]
    quiet: bool,
}

#[derive(Debug, Args)]
struct PlotArgs {
    #[arg(long, value_name = "PATH")]
    csv: PathBuf,
    /// energy or tail
    #[arg(long, value_parser = ["energy", "tail"])]
    kind: String,
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
}

fn run(name: &str, args: &RunArgs) -> Result<bool> {
    let registry = ScenarioRegistry::builtin();
    let scenario = registry.get(name)?;
    let mut cfg = parse_config(&args.config)?;
    if let Some(seed) = args.seed {
        cfg = cfg.with_seed(seed);
    }
    let mut report = scenario.run(&cfg)?;
    if let Some(dir) = &args.out {
        emit_report(&mut report, &cfg, dir)?;
    }
    if !args.quiet {
        println!("{}", report.summary());
    }
    Ok(report.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Simulate(a) => run("simulate", a),
        Command::Absorb(a) => run("absorb", a),
        Command::Tail(a) => run("tail", a),
        Command::Depend(a) => run("depend", a),
        Command::Oracle(a) => run("oracle", a),
        Command::CheckKernel(a) => run("check-kernel", a),
        Command::Gronwall(a) => run("gronwall", a),
        Command::Plot(p) => read_csv(&p.csv)
            .and_then(|t| plot_series(&t, PlotKind::parse(&p.kind).unwrap_or(PlotKind::Energy), &p.out))
            .map(|_| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
