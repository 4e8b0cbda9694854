use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use projflow::{parse_config, scenarios, ConfigError, Scenario};

#[derive(Parser)]
#[command(name = "projflow", version, about = "Projective-flow simulator for linear hyperviscous SPDEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `master_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate an ensemble and write trajectories, jumps and a summary.
    Simulate(Common),
    /// Estimate the top Lyapunov exponent by the direct and FK methods.
    Lyapunov(Common),
    /// Ensemble mean of the Lyapunov functional after `t_star` from `e_M`.
    Contraction(Common),
    /// Dilution probabilities per level and the median drift check.
    Instability(Common),
    /// Decay and support conditions of the configured noise.
    ValidateNoise(Common),
    /// Oracle checks and inequality suites; exits 2 if any fails.
    Selftest(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (scenario, args) = match cli.command {
        Command::Simulate(c) => (Scenario::Simulate, c),
        Command::Lyapunov(c) => (Scenario::Lyapunov, c),
        Command::Contraction(c) => (Scenario::Contraction, c),
        Command::Instability(c) => (Scenario::Instability, c),
        Command::ValidateNoise(c) => (Scenario::ValidateNoise, c),
        Command::Selftest(c) => (Scenario::Selftest, c),
    };
    let mut cfg = match parse_config(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(if matches!(e, ConfigError::Io { .. }) { 1 } else { 3 });
        }
    };
    if cfg.scenario != scenario {
        eprintln!(
            "error: {} is a '{}' config but the '{}' command was given",
            args.config.display(),
            cfg.scenario.name(),
            scenario.name()
        );
        return ExitCode::from(3);
    }
    if let Some(s) = args.seed {
        cfg.master_seed = s;
    }
    let out = args.out.unwrap_or_else(|| PathBuf::from(&cfg.output_dir));
    match scenarios::run(&cfg, &out) {
        Ok(outcome) => {
            for line in &outcome.lines {
                println!("{line}");
            }
            for w in &outcome.manifest.warnings {
                eprintln!("warning: {w}");
            }
            println!("config hash {}; artifacts in {}", outcome.manifest.config_hash, out.display());
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
