//! `msgate` command-line front end.
//!
//! Exit codes: 0 success, 2 invalid input, 3 numerical gate failure
//! (norm drift, calibration or scheme non-convergence, lost gate manifold),
//! 1 when an output cannot be written.

mod commands;
mod inputs;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use inputs::ChainArgs;
use manifest::RunManifest;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("cannot write {0}")]
    Output(String),
    #[error(transparent)]
    Lib(#[from] msgate::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Output(_) => 1,
            CliError::Lib(e) if e.is_numerical() => 3,
            CliError::Lib(msgate::Error::Io(_)) => 1,
            CliError::Lib(_) => 2,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "msgate", version, about = "Mølmer–Sørensen pulse synthesis, simulation and error diagnostics")]
struct Cli {
    /// Worker threads for sweeps and gate channels; 1 is the reference mode.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Where to write the run manifest (default: <first output>.manifest.json).
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
enum Command {
    /// Synthesize a power-optimal pulse for a gate pair.
    Synth(SynthArgs),
    /// Propagate one computational basis state through the gate.
    Simulate(SimulateArgs),
    /// Gate fidelities from saved final states or a fresh channel simulation.
    Fidelity(FidelityArgs),
    /// Rescale a pulse until the simulated gate angle hits the target.
    Calibrate(CalibrateArgs),
    /// Magnus error budget of a pulse.
    Audit(AuditArgs),
    /// Φ-infidelity over gate pairs, with a histogram.
    Sweep(SweepArgs),
    /// Table of the spectral functionals of a pulse.
    Functionals(FunctionalsArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct SynthArgs {
    #[command(flatten)]
    pub chain: ChainArgs,
    /// Gate ions, 1-based, e.g. "2,5".
    #[arg(long)]
    pub pair: String,
    #[arg(long)]
    pub tau_us: f64,
    /// Add the Φ = 0 constraint.
    #[arg(long)]
    pub phi: bool,
    /// Tone range "LO,HI"; default spans the mode band with two spare tones each side.
    #[arg(long)]
    pub basis: Option<String>,
    /// |χ| target.
    #[arg(long, default_value = "pi/4")]
    pub chi: String,
    /// Eigenvector choice: the largest positive eigenvalue, or the largest |eigenvalue|.
    #[arg(long, value_enum, default_value_t = SignPolicy::Positive)]
    pub sign_policy: SignPolicy,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(clap::ValueEnum, Debug, Clone, Copy, Serialize)]
pub enum SignPolicy {
    Positive,
    LargestMagnitude,
}

#[derive(Args, Debug, Serialize)]
pub struct SimArgs {
    #[command(flatten)]
    pub chain: ChainArgs,
    #[arg(long)]
    pub pulse: PathBuf,
    #[arg(long)]
    pub pair: String,
    /// "full", "hs", or the truncation orders "nc,ns".
    #[arg(long, default_value = "full")]
    pub ham: String,
    /// Per-mode cutoffs, "2621111" or "2,6,2,1,1,1,1"; "auto" converges one with the H_S self-test.
    #[arg(long, default_value = "auto")]
    pub scheme: String,
    /// Fixed RK4 step in ns; default keeps ω_max·dt ≤ 2π/40.
    #[arg(long)]
    pub dt_ns: Option<f64>,
}

#[derive(Args, Debug, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    #[arg(long, default_value = "00")]
    pub psi0: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct FidelityArgs {
    /// Final states for inputs 00, 01, 10, 11 (in that order); one file gives F_S only.
    #[arg(long, num_args = 1..=4)]
    pub state: Vec<PathBuf>,
    /// Signed target angle.
    #[arg(long, default_value = "pi/4")]
    pub chi: String,
    /// Keep phonon-excited amplitudes (traced) or only the vacuum components.
    #[arg(long, value_enum, default_value_t = Mode::Traced)]
    pub mode: Mode,
    /// Simulate the channel instead of reading states.
    #[arg(long, conflicts_with = "state")]
    pub pulse: Option<PathBuf>,
    #[command(flatten)]
    pub chain: ChainArgs,
    #[arg(long)]
    pub pair: Option<String>,
    #[arg(long, default_value = "full")]
    pub ham: String,
    #[arg(long, default_value = "auto")]
    pub scheme: String,
    #[arg(long)]
    pub dt_ns: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(clap::ValueEnum, Debug, Clone, Copy, Serialize)]
pub enum Mode {
    Traced,
    Vacuum,
}

#[derive(Args, Debug, Serialize)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    /// Signed target; default is the pulse's own design angle.
    #[arg(long)]
    pub chi: Option<String>,
    #[arg(long, default_value_t = 8)]
    pub max_iters: usize,
    /// Also simulate the calibrated channel and write its fidelity report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct AuditArgs {
    #[command(flatten)]
    pub chain: ChainArgs,
    #[arg(long)]
    pub pulse: PathBuf,
    #[arg(long)]
    pub pair: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct SweepArgs {
    #[command(flatten)]
    pub chain: ChainArgs,
    #[arg(long)]
    pub tau_us: f64,
    /// Synthesize Φ-constrained pulses.
    #[arg(long)]
    pub phi: bool,
    /// Only nearest-neighbour pairs (j, j+1).
    #[arg(long)]
    pub neighbours: bool,
    #[arg(long)]
    pub basis: Option<String>,
    /// Histogram bin width in pptt (units of 1e-4).
    #[arg(long, default_value_t = 1.0)]
    pub bin_width: f64,
    /// Histogram CSV: bin_lo,bin_hi,count.
    #[arg(long)]
    pub histogram: PathBuf,
    /// Per-pair CSV; default is <histogram stem>_pairs.csv.
    #[arg(long)]
    pub rows: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct FunctionalsArgs {
    #[command(flatten)]
    pub chain: ChainArgs,
    #[arg(long)]
    pub pulse: PathBuf,
    #[arg(long)]
    pub pair: String,
    /// Also write the table as CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn run(cli: Cli, argv: Vec<String>) -> Result<(), CliError> {
    let start = Instant::now();
    let name = match &cli.command {
        Command::Synth(_) => "synth",
        Command::Simulate(_) => "simulate",
        Command::Fidelity(_) => "fidelity",
        Command::Calibrate(_) => "calibrate",
        Command::Audit(_) => "audit",
        Command::Sweep(_) => "sweep",
        Command::Functionals(_) => "functionals",
    };
    let mut m = RunManifest::new(argv, name, &cli.command, cli.jobs);
    let jobs = cli.jobs.max(1);
    match &cli.command {
        Command::Synth(a) => commands::synth(a, &mut m)?,
        Command::Simulate(a) => commands::simulate(a, &mut m)?,
        Command::Fidelity(a) => commands::fidelity(a, jobs, &mut m)?,
        Command::Calibrate(a) => commands::calibrate(a, jobs, &mut m)?,
        Command::Audit(a) => commands::audit(a, &mut m)?,
        Command::Sweep(a) => commands::sweep(a, jobs, &mut m)?,
        Command::Functionals(a) => commands::functionals(a, &mut m)?,
    }
    m.wall_time_s = start.elapsed().as_secs_f64();
    if let Some(path) = cli.manifest.clone().or_else(|| m.default_path()) {
        m.write(&path)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli, argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
