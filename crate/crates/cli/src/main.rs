use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use lure_forge_cli::config::{Overrides, RunConfig};
use lure_forge_cli::repro::{self, ReproOptions};
use lure_forge_cli::{pipeline, CliError};

#[derive(Parser)]
#[command(name = "lure-forge", version, about = "Rate certificates and projected variants of first-order methods")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Canonical form and structural checks.
    Canonicalize(Common),
    /// Rate certificate by bisection.
    Certify(Common),
    /// Projected algorithm from a certificate.
    Synthesize(Common),
    /// Projected, naive and unconstrained trajectories.
    Run(Common),
    /// Regenerate the delayed-gradient example and its acceptance table.
    ReproPaper(ReproArgs),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    ell: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReproArgs {
    #[arg(long)]
    ell: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "repro-out")]
    out: PathBuf,
    /// Extra lifts to certify, e.g. `--sweep 0,1,3,5`.
    #[arg(long, value_delimiter = ',')]
    sweep: Vec<usize>,
    /// Reuse a certificate file instead of bisecting.
    #[arg(long)]
    certificate: Option<PathBuf>,
}

fn load(c: &Common) -> Result<RunConfig, CliError> {
    RunConfig::load(&c.config, &Overrides { ell: c.ell, seed: c.seed, out: c.out.clone() })
}

fn execute(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Canonicalize(c) => pipeline::cmd_canonicalize(&load(&c)?),
        Command::Certify(c) => pipeline::cmd_certify(&load(&c)?),
        Command::Synthesize(c) => pipeline::cmd_synthesize(&load(&c)?),
        Command::Run(c) => pipeline::cmd_run(&load(&c)?),
        Command::ReproPaper(a) => {
            let start = Instant::now();
            let opts = ReproOptions { ell: a.ell, seed: a.seed, out: a.out, sweep: a.sweep, certificate: a.certificate };
            let outcome = repro::repro_paper(&opts)?;
            let table = outcome.table();
            eprintln!("finished in {:.1} s", start.elapsed().as_secs_f64());
            if outcome.passed() {
                Ok(table)
            } else {
                Err(CliError::Acceptance(format!("\n{table}")))
            }
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("lure-forge: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
