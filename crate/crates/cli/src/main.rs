use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use levyterm_cli::{run, Command};

/// Simulate and validate Lévy-driven forward-curve models.
#[derive(Parser, Debug)]
#[command(name = "levyterm", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(clap::Args, Debug)]
struct Common {
    /// Scenario file (TOML).
    scenario: PathBuf,
    /// Override a scenario value, e.g. `--set monte_carlo.n_paths=500`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory.
    #[arg(long, default_value = "levyterm-out")]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Run the Monte Carlo ensemble and the no-arbitrage test.
    Simulate(Common),
    /// Run the numerical check suite and the scenario's hypothesis check.
    Validate(Common),
    /// Curve-space norms of the initial curve and volatility basis.
    Norms(Common),
    /// No-arbitrage drift at the initial curve.
    Drift(Common),
    /// Dyadic approximants against the pathwise integral.
    Integrate(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Cmd::Simulate(a) => (Command::Simulate, a),
        Cmd::Validate(a) => (Command::Validate, a),
        Cmd::Norms(a) => (Command::Norms, a),
        Cmd::Drift(a) => (Command::Drift, a),
        Cmd::Integrate(a) => (Command::Integrate, a),
    };
    match run(command, &args.scenario, &args.overrides, &args.out) {
        Ok(outcome) => {
            for c in &outcome.checks {
                println!("{:<4} {}", if c.passed { "ok" } else { "FAIL" }, c.id);
            }
            if outcome.passed() {
                ExitCode::SUCCESS
            } else {
                eprintln!("check,expected,got,tolerance");
                for c in outcome.failures() {
                    eprintln!("{},{:?},{:?},{}", c.id, c.expected, c.got, c.tolerance);
                }
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
