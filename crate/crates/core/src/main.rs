use std::path::PathBuf;
use std::process;

use clap::{Parser, Subcommand};

use zurn::harness::{
    run_command, ExitStatus, ExperimentConfig, HarnessError, Mode, Overrides, Preset,
};

#[derive(Parser)]
#[command(
    name = "zurn",
    version,
    about = "Random-addition urn simulation and verification lab"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML experiment file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed.
    #[arg(long, global = true, env = "ZURN_SEED")]
    seed: Option<u64>,

    /// Number of independent realizations (M).
    #[arg(long, global = true)]
    realizations: Option<usize>,

    /// Number of added balls per realization (N).
    #[arg(long, global = true)]
    additions: Option<usize>,

    /// Named setup: fig1, fig2a or fig2b.
    #[arg(long, global = true)]
    preset: Option<Preset>,

    /// Output directory.
    #[arg(long = "out", global = true)]
    output_dir: Option<PathBuf>,

    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Run realizations and write labels, A-traces and a summary.
    Simulate,
    /// Distribution of the final A over realizations against its exact mean.
    ADistribution,
    /// Monte Carlo second moments against the exact recursion (d = 1).
    MomentsCheck,
    /// Quenched, pooled and coordinate-coupling limit-law checks.
    LimitCheck,
    /// Population-dynamics checks of the fixed-point equations.
    FixedPoint,
}

impl From<Command> for Mode {
    fn from(c: Command) -> Mode {
        match c {
            Command::Simulate => Mode::Simulate,
            Command::ADistribution => Mode::ADistribution,
            Command::MomentsCheck => Mode::MomentsCheck,
            Command::LimitCheck => Mode::LimitCheck,
            Command::FixedPoint => Mode::FixedPoint,
        }
    }
}

fn run(cli: Cli) -> Result<ExitStatus, HarnessError> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let mode = Mode::from(cli.command);
    if let Some(m) = cfg.mode {
        if m != mode {
            eprintln!(
                "note: config file names mode `{}`, running `{}`",
                m.as_str(),
                mode.as_str()
            );
        }
    }
    cfg.apply(&Overrides {
        preset: cli.preset,
        seed: cli.seed,
        realizations: cli.realizations,
        additions: cli.additions,
        output_dir: cli.output_dir,
        threads: cli.threads,
    });
    cfg.mode = Some(mode);
    let outcome = run_command(mode, &cfg)?;
    for line in &outcome.lines {
        println!("{line}");
    }
    Ok(outcome.status)
}

fn main() {
    let cli = Cli::parse();
    let status = match run(cli) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_status()
        }
    };
    process::exit(status.code());
}
