//! Command-line experiments for the waveguide quantum battery.
//!
//! Each command writes CSV tables and a `manifest.toml` into the output
//! directory. The manifest holds the fully resolved configuration and the
//! checksum of every table; `qbattery replay` repeats the run from it and
//! verifies the bytes.
//!
//! Exit codes: 0 success, 1 other failure, 2 configuration error,
//! 3 numerical-health failure.

pub mod config;
pub mod experiments;
pub mod manifest;
pub mod output;
pub mod selftest;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use qbattery::exec::available_workers;
use qbattery::Execution;

use config::{Experiment, RunConfig};
use experiments::Runner;
use manifest::{RunManifest, ERROR_BARS, MANIFEST_NAME};
use output::OutputSet;

pub const WORKERS_ENV: &str = "QBATTERY_WORKERS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical health failure: {0}")]
    Health(String),
    #[error(transparent)]
    Core(#[from] qbattery::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("replay differs from the manifest: {0}")]
    ReplayMismatch(String),
    #[error("{0} self-test check(s) failed")]
    SelfTest(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Health(_) => 3,
            CliError::Core(e) => core_exit_code(e),
            _ => 1,
        }
    }
}

fn core_exit_code(e: &qbattery::Error) -> i32 {
    use qbattery::Error as E;
    match e {
        E::Realization { source, .. } => core_exit_code(source),
        E::StepUnderflow { .. } | E::TooManySteps { .. } | E::Negativity { .. } | E::EigenFailure => 3,
        E::InterSectorCoherence { .. } | E::FitInput(_) => 1,
        _ => 2,
    }
}

#[derive(Debug, Parser)]
#[command(name = "qbattery", version, about = "Storage dynamics of waveguide-QED quantum batteries")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the experiments listed under [run] in the configuration
    Run(RunArgs),
    /// Energy and ergotropy per cell against time, per arrangement and size
    DecayCurve(RunArgs),
    /// Tail decay rates of the ordered array and their scaling with size
    FitRates(RunArgs),
    /// Site-resolved energies against time
    LocalEnergy(RunArgs),
    /// Stored energy against lattice spacing
    SpacingSweep(RunArgs),
    /// Print the resolved configuration as TOML
    Config(RunArgs),
    /// Fast invariant checks
    Selftest,
    /// Repeat a run from its manifest and compare the outputs byte for byte
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// TOML configuration; defaults apply to every missing key
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads, 0 for all cores; does not affect results
    #[arg(long, env = WORKERS_ENV)]
    pub workers: Option<usize>,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
    /// Realizations per disordered ensemble
    #[arg(long)]
    pub n_avg: Option<usize>,
    /// Absolute and relative tolerance of every experiment's integrator
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    /// Must differ from the directory holding the manifest
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, env = WORKERS_ENV)]
    pub workers: Option<usize>,
}

fn execution(workers: Option<usize>) -> Execution {
    match workers {
        None | Some(0) => Execution::with_workers(available_workers()),
        Some(n) => Execution::with_workers(n),
    }
}

/// Configuration file plus flag overrides; `only` replaces the experiment list.
pub fn resolve_config(args: &RunArgs, only: Option<Experiment>) -> Result<RunConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.run.seed = seed;
    }
    if let Some(n) = args.n_avg {
        cfg.run.n_avg = n;
    }
    if let Some(tol) = args.tol {
        cfg.set_tolerance(tol);
    }
    if let Some(exp) = only {
        cfg.run.experiments = vec![exp];
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs `config` into `out_dir`; on failure every file of the run is removed.
pub fn execute(command: &str, config: &RunConfig, out_dir: &Path, exec: Execution) -> Result<RunManifest, CliError> {
    let mut out = OutputSet::create(out_dir)?;
    let mut runner = Runner::new(config, exec);
    if let Err(e) = runner.run_all(config, &mut out) {
        out.discard();
        return Err(e);
    }
    let manifest = RunManifest {
        software: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: command.to_string(),
        seed: config.run.seed,
        workers: exec.workers(),
        error_bars: ERROR_BARS.to_string(),
        health: runner.health(),
        phases: runner.phases().to_vec(),
        outputs: out.files().iter().map(Into::into).collect(),
        config: config.clone(),
    };
    if let Err(e) = std::fs::write(out.dir().join(MANIFEST_NAME), manifest.to_toml()) {
        out.discard();
        return Err(e.into());
    }
    Ok(manifest)
}

/// Re-runs a manifest into `out_dir` and checks every output checksum.
pub fn replay(manifest_path: &Path, out_dir: &Path, exec: Execution) -> Result<RunManifest, CliError> {
    let original = RunManifest::load(manifest_path)?;
    if manifest_path.parent().map(|p| same_dir(p, out_dir)).unwrap_or(false) {
        return Err(CliError::Config("replay output directory must differ from the original".into()));
    }
    original.config.validate()?;
    let rerun = execute(&original.command, &original.config, out_dir, exec)?;
    let mut problems = Vec::new();
    for entry in &original.outputs {
        match rerun.outputs.iter().find(|o| o.path == entry.path) {
            Some(o) if o.sha256 == entry.sha256 => {}
            Some(_) => problems.push(format!("{} has different contents", entry.path)),
            None => problems.push(format!("{} was not produced", entry.path)),
        }
    }
    for o in &rerun.outputs {
        if !original.outputs.iter().any(|e| e.path == o.path) {
            problems.push(format!("{} is not in the manifest", o.path));
        }
    }
    if problems.is_empty() {
        Ok(rerun)
    } else {
        Err(CliError::ReplayMismatch(problems.join("; ")))
    }
}

fn same_dir(a: &Path, b: &Path) -> bool {
    let a = if a.as_os_str().is_empty() { Path::new(".") } else { a };
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    }
}

fn report(manifest: &RunManifest, out_dir: &Path) {
    println!(
        "{} outputs in {} (max trace drift {:.3e}, min eigenvalue {:.3e})",
        manifest.outputs.len(),
        out_dir.display(),
        manifest.health.max_trace_drift,
        manifest.health.min_eigenvalue
    );
}

fn dispatch(command: Command) -> Result<(), CliError> {
    let (name, args, only) = match command {
        Command::Selftest => {
            let checks = selftest::run_checks();
            for c in &checks {
                println!("{} {} ({})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            let failures = checks.iter().filter(|c| !c.passed).count();
            return if failures == 0 { Ok(()) } else { Err(CliError::SelfTest(failures)) };
        }
        Command::Replay(args) => {
            let manifest = replay(&args.manifest, &args.out_dir, execution(args.workers))?;
            report(&manifest, &args.out_dir);
            println!("all outputs match {}", args.manifest.display());
            return Ok(());
        }
        Command::Config(args) => {
            print!("{}", resolve_config(&args, None)?.to_toml());
            return Ok(());
        }
        Command::Run(args) => ("run", args, None),
        Command::DecayCurve(args) => ("decay-curve", args, Some(Experiment::DecayCurve)),
        Command::FitRates(args) => ("fit-rates", args, Some(Experiment::FitRates)),
        Command::LocalEnergy(args) => ("local-energy", args, Some(Experiment::LocalEnergy)),
        Command::SpacingSweep(args) => ("spacing-sweep", args, Some(Experiment::SpacingSweep)),
    };
    let config = resolve_config(&args, only)?;
    let manifest = execute(name, &config, &args.out_dir, execution(args.workers))?;
    report(&manifest, &args.out_dir);
    Ok(())
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("qbattery: {e}");
            e.exit_code()
        }
    }
}
