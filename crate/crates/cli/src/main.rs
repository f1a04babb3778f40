#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

mod artifacts;
mod commands;
mod config;

use clap::{Args, Parser, Subcommand};
use commands::Outcome;
use config::{ConfigError, RunConfig};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "interface-lab",
    version,
    about = "Interface dynamics experiments for the semilinear wave equation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Configuration file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set eps=0.1,0.05`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory, overriding `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate the heteroclinic profile.
    Profile(Common),
    /// Sample the configured surface and its invariants.
    Surface(Common),
    /// Check the canonical and modified Fermi charts.
    FermiCheck(Common),
    /// Manufactured-solution study of the Jacobi solver.
    Jacobi(Common),
    /// Build the order-k ansatz for every ε.
    Ansatz(Common),
    /// Sup residual of the ansatz for k = 0..=ansatz.k and every ε, with log-log slopes.
    ResidualScan(Common),
    /// Evolve the nonlinear wave equation from the ansatz or the exact kink.
    Simulate(Common),
    /// Energy diagnostics for the linearized planar run described by a run directory.
    EnergyCheck {
        /// Run directory holding `config.txt`.
        #[arg(long)]
        run: PathBuf,
        #[arg(long = "C-gamma")]
        c_gamma: Option<f64>,
        /// CSV destination; defaults to `<run>/energy.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the acceptance criteria.
    Acceptance {
        /// Smallest resolutions.
        #[arg(long)]
        quick: bool,
        /// Comma-separated criterion ids; all when absent.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
    },
}

fn load(c: &Common) -> Result<RunConfig, ConfigError> {
    let mut cfg = match &c.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| ConfigError(format!("{}: {e}", p.display())))?;
            RunConfig::parse(&text)?
        }
        None => RunConfig::default(),
    };
    for kv in &c.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| ConfigError(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(o) = &c.out {
        cfg.output_dir = o.clone();
    }
    cfg.validate()?;
    commands::thread_pool()?;
    Ok(cfg)
}

fn run(cmd: Command) -> anyhow::Result<Outcome> {
    let with = |c: &Common| -> anyhow::Result<(RunConfig, interface_lab::nonlinearity::Nonlinearity)> {
        let cfg = load(c)?;
        let nl = cfg.nonlinearity()?;
        Ok((cfg, nl))
    };
    match cmd {
        Command::Profile(c) => with(&c).and_then(|(cfg, nl)| commands::profile(&cfg, nl)),
        Command::Surface(c) => with(&c).and_then(|(cfg, _)| commands::surface_cmd(&cfg)),
        Command::FermiCheck(c) => with(&c).and_then(|(cfg, _)| commands::fermi_check(&cfg)),
        Command::Jacobi(c) => with(&c).and_then(|(cfg, _)| commands::jacobi(&cfg)),
        Command::Ansatz(c) => with(&c).and_then(|(cfg, nl)| commands::ansatz(&cfg, nl)),
        Command::ResidualScan(c) => with(&c).and_then(|(cfg, nl)| commands::residual_scan_cmd(&cfg, nl)),
        Command::Simulate(c) => with(&c).and_then(|(cfg, nl)| commands::simulate(&cfg, nl)),
        Command::EnergyCheck { run, c_gamma, out } => commands::energy_check(&run, c_gamma, out.as_deref()),
        Command::Acceptance { quick, only } => commands::acceptance(quick, &only),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Gate(msg)) => {
            eprintln!("gate failed: {msg}");
            ExitCode::from(1)
        }
        Err(e) if e.is::<ConfigError>() => {
            eprintln!("invalid configuration: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}
