//! `rydberg-toffoli`: figure data for the three-body Förster-resonance Toffoli gate.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::Failure;
use crate::config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "rydberg-toffoli", version, about = "Stark-tuned Förster resonances and a three-qubit Rydberg Toffoli gate")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Integrator tolerance (overrides the config).
    #[arg(long, global = true)]
    tolerance: Option<f64>,

    /// Seed for the optimizer start jitter.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Also write gnuplot scripts.
    #[arg(long, global = true)]
    gnuplot: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Collective energies against field, with crossings against the final state.
    StarkMap,
    /// Transfer fraction ρ(T) against field.
    ResonanceScan,
    /// Population and phase of the initial state for each excitation pattern.
    Dynamics,
    /// Mean gate fidelity against field, plus the per-input report at the gate field.
    Fidelity,
    /// Nelder–Mead search over (T, E).
    Optimize,
    /// Radial integrals of the gate basis, quasiclassical against Numerov.
    DumpMatrixElements,
    /// Hamiltonian of the configured channel at the gate field.
    DumpHamiltonian,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::StarkMap => "stark-map",
            Command::ResonanceScan => "resonance-scan",
            Command::Dynamics => "dynamics",
            Command::Fidelity => "fidelity",
            Command::Optimize => "optimize",
            Command::DumpMatrixElements => "dump-matrix-elements",
            Command::DumpHamiltonian => "dump-hamiltonian",
        }
    }
}

fn resolve(cli: &Cli) -> Result<(RunConfig, String), Failure> {
    let (mut cfg, source) = match &cli.config {
        Some(p) => RunConfig::load(p).map_err(|e| Failure::Validation(e.to_string()))?,
        None => (RunConfig::default(), String::new()),
    };
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if let Some(t) = cli.tolerance {
        cfg.tolerance = t;
    }
    if let Some(s) = cli.seed {
        cfg.seed = Some(s);
    }
    if cli.gnuplot {
        cfg.gnuplot = true;
    }
    cfg.validate(cli.command.name(), &source).map_err(|e| Failure::Validation(e.to_string()))?;
    Ok((cfg, source))
}

fn run(cli: &Cli) -> Result<(), Failure> {
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(Failure::Validation("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(j).build_global().map_err(|e| Failure::Numerical(e.to_string()))?;
    }
    let (cfg, _) = resolve(cli)?;
    let ctx = commands::Context::new(cfg, cli.command.name())?;
    match cli.command {
        Command::StarkMap => commands::stark_map(&ctx),
        Command::ResonanceScan => commands::resonance_scan(&ctx),
        Command::Dynamics => commands::dynamics(&ctx),
        Command::Fidelity => commands::fidelity(&ctx),
        Command::Optimize => commands::optimize(&ctx),
        Command::DumpMatrixElements => commands::dump_matrix_elements(&ctx),
        Command::DumpHamiltonian => commands::dump_hamiltonian(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
