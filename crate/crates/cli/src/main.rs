//! `kgfw`: spectra, transformation checks, evolution and semiclassical
//! dynamics for a spin-0 particle in a stationary electromagnetic field.

mod commands;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use kgfw_core::config::{load_config_with_overrides, Config};
use kgfw_core::Error as CoreError;

use commands::Setup;
use report::{write_report, RunReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    /// Pseudo-Hermiticity of H and pseudo-unitarity of the transformations.
    Pseudo,
    /// Independence of the FW Hamiltonian from N.
    Nindep,
    /// Commutator identities behind the closed-form Hamiltonian.
    Commutators,
    /// Duffin-Kemmer-Petiau equivalence at N = m.
    Dkp,
    /// hbar^2 scaling of the quantum corrections.
    Hbar,
}

#[derive(Parser, Debug)]
#[command(name = "kgfw", version, about)]
struct Cli {
    /// TOML configuration; omitted sections take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a configuration value, e.g. `--set particle.mass=2`.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Output directory.
    #[arg(long, env = "KGFW_OUT_DIR", default_value = "out", global = true)]
    out: PathBuf,
    #[arg(long, default_value_t = 0, global = true)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv, global = true)]
    format: OutputFormat,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Diagonalise the two-component, exact FW or closed-form FW Hamiltonian.
    Spectrum,
    /// Run a verification suite.
    Verify {
        #[arg(value_enum)]
        suite: Suite,
    },
    /// Evolve a positive-energy packet with the two-component Hamiltonian.
    Evolve,
    /// Integrate the semiclassical equations of motion.
    Trajectory,
    /// Compare quantum centroids with classical trajectories.
    Ehrenfest,
    /// Induced dipole moments at seeded phase-space points.
    Dipoles,
}

impl Command {
    fn stem(&self) -> String {
        match self {
            Command::Spectrum => "spectrum".into(),
            Command::Verify { suite } => format!("verify_{}", format!("{suite:?}").to_lowercase()),
            Command::Evolve => "evolve".into(),
            Command::Trajectory => "trajectory".into(),
            Command::Ehrenfest => "ehrenfest".into(),
            Command::Dipoles => "dipoles".into(),
        }
    }
}

fn load(cli: &Cli) -> std::result::Result<(Config, kgfw_core::fields::FieldConfig, String), CoreError> {
    let text = match &cli.config {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| CoreError::Config { line: 0, message: format!("reading {}: {e}", path.display()) })?,
        None => String::new(),
    };
    let cfg = load_config_with_overrides(&text, &cli.set)?;
    let field = cfg.field.to_field(&text)?;
    Ok((cfg, field, text))
}

fn run(cli: &Cli, setup: &Setup, out: &Path, report: &mut RunReport) -> Result<()> {
    match &cli.command {
        Command::Spectrum => commands::spectrum(setup, out, report),
        Command::Verify { suite } => commands::verify(setup, *suite, out, report),
        Command::Evolve => commands::evolve(setup, out, report),
        Command::Trajectory => commands::trajectory(setup, out, report),
        Command::Ehrenfest => commands::ehrenfest(setup, out, report),
        Command::Dipoles => commands::dipoles(setup, out, report),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cfg, field, _) = match load(&cli) {
        Ok(x) => x,
        Err(e) => {
            eprintln!("configuration error: {e}");
            return ExitCode::from(2);
        }
    };
    match execute(&cli, cfg, field) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn execute(cli: &Cli, cfg: Config, field: kgfw_core::fields::FieldConfig) -> Result<bool> {
    let out = cli.out.clone();
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let stem = cli.command.stem();
    let mut report = RunReport::new(&stem, cli.seed, serde_json::to_value(&cfg)?);
    let started = Instant::now();
    let result = Setup::new(cfg, field, cli.seed, cli.format).and_then(|s| run(cli, &s, &out, &mut report));
    if let Err(e) = result {
        report.error = Some(format!("{e:#}"));
    }
    report.finish();
    let path = write_report(&out, &stem, &report)?;
    let elapsed = started.elapsed().as_secs_f64();
    std::fs::write(out.join(format!("{stem}_timing.txt")), format!("wall_seconds = {elapsed:.3}\n"))?;
    for c in &report.checks {
        println!("{} {}: {:.3e} ({} {:.1e})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, if c.lower_bound { ">=" } else { "<=" }, c.tol);
    }
    if let Some(e) = &report.error {
        eprintln!("error: {e}");
    }
    eprintln!("report: {} ({elapsed:.2} s)", path.display());
    Ok(report.pass)
}
