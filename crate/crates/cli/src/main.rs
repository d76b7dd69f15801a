use std::path::PathBuf;
use std::process::ExitCode;

use attractor_forge_cli::{configure_threads, parse_config, run, CliError, ExperimentKind};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "attractor-forge", version, about = "Pullback attractor experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Experiment configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Certify structural conditions of a drift by randomized trials.
    Certify(RunArgs),
    /// Integrate one trajectory and check the energy inequality.
    Simulate(RunArgs),
    /// Pull a bundle of initial fields back from a ladder of start times.
    Pullback(RunArgs),
    /// Compare pair distances with the polynomial or exponential bound.
    Rates(RunArgs),
    /// Generate and store a noise path.
    #[command(name = "noise-gen")]
    NoiseGen(RunArgs),
}

fn execute(kind: ExperimentKind, args: RunArgs) -> Result<i32, CliError> {
    configure_threads()?;
    let text = std::fs::read_to_string(&args.config).map_err(|e| CliError::Io {
        path: args.config.display().to_string(),
        message: e.to_string(),
    })?;
    let mut cfg = parse_config(&text, Some(kind))?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.output = out.display().to_string();
    }
    let outcome = run(&cfg, &PathBuf::from(&cfg.output))?;
    for f in &outcome.files {
        eprintln!("wrote {}", f.display());
    }
    eprintln!("{}: {}", kind.name(), outcome.summary);
    if outcome.violated {
        eprintln!("violation detected");
    }
    Ok(outcome.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::Certify(a) => (ExperimentKind::Certify, a),
        Command::Simulate(a) => (ExperimentKind::Simulate, a),
        Command::Pullback(a) => (ExperimentKind::Pullback, a),
        Command::Rates(a) => (ExperimentKind::Rates, a),
        Command::NoiseGen(a) => (ExperimentKind::NoiseGen, a),
    };
    let code = match execute(kind, args) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
