//! Command-line frontend: one JSON configuration document per run, CSV/JSON
//! outputs with provenance headers, deterministic for a fixed config and
//! seed. Exit codes: 0 success, 2 configuration error, 3 numeric failure.

mod config;
mod output;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;

use output::Provenance;
use toplab::error::Error;

#[derive(Parser)]
#[command(name = "toplab", version, about = "Numerical laboratory for the Lagrange top near gyroscopic stabilization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Path to the JSON configuration document.
    #[arg(long, global = true, default_value = "config.json")]
    config: PathBuf,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker-pool size (defaults to the number of cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Seed for randomized presets.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the reduced top or the coupled system.
    Simulate,
    /// Classify the Floquet spectrum of the vertical rotations over an (a, c) grid.
    ScanSpectrum,
    /// Order-4 resonant Birkhoff normalization.
    NormalForm,
    /// Critical-value surfaces of the reduced model and the top.
    Strata,
    /// Diophantine scans over the detuning plane.
    DiophScan,
    /// Frequency extraction from synthetic signals or simulations.
    Naff,
    /// Torus persistence scans under coupling perturbations.
    Persistence,
    /// Rotation-number continuation and the monodromy matrix.
    Monodromy,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::ScanSpectrum => "scan-spectrum",
            Command::NormalForm => "normal-form",
            Command::Strata => "strata",
            Command::DiophScan => "dioph-scan",
            Command::Naff => "naff",
            Command::Persistence => "persistence",
            Command::Monodromy => "monodromy",
        }
    }
}

fn load_config<T: DeserializeOwned>(path: &PathBuf) -> Result<T, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("invalid config: {e}")))
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Config(_)
        | Error::Dimension(_)
        | Error::Capacity(_)
        | Error::Data(_)
        | Error::Bracket(_)
        | Error::Structure(_)
        | Error::InvalidState(_)
        | Error::DegenerateInput(_)
        | Error::Unsupported(_) => 2,
        Error::StepFailure { .. }
        | Error::SmallDivisor(_)
        | Error::Stratum(_)
        | Error::Numeric(_)
        | Error::Continuation(_)
        | Error::Estimation(_) => 3,
    }
}

fn dispatch(cli: &Cli) -> Result<(), Error> {
    if let Some(n) = cli.workers {
        // Ignore the error if a global pool already exists; results are
        // deterministic regardless of the pool size.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    std::fs::create_dir_all(&cli.out)
        .map_err(|e| Error::Config(format!("cannot create output dir: {e}")))?;
    let name = cli.command.name();
    match cli.command {
        Command::Simulate => {
            let cfg: config::SimulateConfig = load_config(&cli.config)?;
            let prov = Provenance::new(name, &cfg, cli.seed);
            run::simulate(&cfg, &cli.out, &prov)
        }
        Command::ScanSpectrum => {
            let cfg: config::ScanSpectrumConfig = load_config(&cli.config)?;
            let prov = Provenance::new(name, &cfg, cli.seed);
            run::scan_spectrum(&cfg, &cli.out, &prov)
        }
        Command::NormalForm => {
            let cfg: config::NormalFormConfig = load_config(&cli.config)?;
            let prov = Provenance::new(name, &cfg, cli.seed);
            run::normal_form(&cfg, &cli.out, &prov, cli.seed)
        }
        Command::Strata => {
            let cfg: config::StrataConfig = load_config(&cli.config)?;
            let prov = Provenance::new(name, &cfg, cli.seed);
            run::strata(&cfg, &cli.out, &prov)
        }
        Command::DiophScan => {
            let cfg: config::DiophScanConfig = load_config(&cli.config)?;
            let prov = Provenance::new(name, &cfg, cli.seed);
            run::dioph_scan(&cfg, &cli.out, &prov)
        }
        Command::Naff => {
            let cfg: config::NaffConfig = load_config(&cli.config)?;
            let prov = Provenance::new(name, &cfg, cli.seed);
            run::naff(&cfg, &cli.out, &prov)
        }
        Command::Persistence => {
            let cfg: config::PersistenceRun = load_config(&cli.config)?;
            let prov = Provenance::new(name, &cfg, cli.seed);
            run::persistence(&cfg, &cli.out, &prov)
        }
        Command::Monodromy => {
            let cfg: config::MonodromyConfig = load_config(&cli.config)?;
            let prov = Provenance::new(name, &cfg, cli.seed);
            run::monodromy(&cfg, &cli.out, &prov)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
