//! Input resolution shared by the subcommands.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use clap::Args;
use msgate::chain::{load_chain_file, seven_ion_chain, synthesize_chain, ChainSpec, GatePair};
use msgate::pulse::Pulse;
use serde::Serialize;

use crate::CliError;

/// Directory searched for relative input paths that do not exist as given.
pub const DATA_DIR_ENV: &str = "MSGATE_DATA_DIR";

pub fn resolve(path: &Path) -> PathBuf {
    if path.is_absolute() || path.exists() {
        return path.to_path_buf();
    }
    match std::env::var_os(DATA_DIR_ENV) {
        Some(dir) => {
            let candidate = Path::new(&dir).join(path);
            if candidate.exists() {
                candidate
            } else {
                path.to_path_buf()
            }
        }
        None => path.to_path_buf(),
    }
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    let p = resolve(path);
    std::fs::read_to_string(&p).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ChainArgs {
    /// Chain document (JSON); the bundled 7-ion table when omitted.
    #[arg(long)]
    pub chain: Option<PathBuf>,
    /// Generate an N-ion chain from a harmonic-trap Coulomb crystal instead.
    #[arg(long, conflicts_with = "chain")]
    pub synthetic: Option<usize>,
    /// Trap anisotropy ω_z/ω_x of the generated chain.
    #[arg(long, default_value_t = 0.05)]
    pub anisotropy: f64,
    /// Common-mode frequency of the generated chain, MHz.
    #[arg(long, default_value_t = 3.0)]
    pub com_mhz: f64,
    /// Common-mode Lamb-Dicke parameter of the generated chain.
    #[arg(long, default_value_t = 0.035)]
    pub eta_com: f64,
}

impl ChainArgs {
    pub fn load(&self) -> Result<ChainSpec, CliError> {
        if let Some(n) = self.synthetic {
            return Ok(synthesize_chain(n, self.anisotropy, 2.0 * PI * self.com_mhz * 1e6, self.eta_com)?);
        }
        match &self.chain {
            Some(path) => {
                let p = resolve(path);
                load_chain_file(&p).map_err(|e| match e {
                    msgate::Error::Io(io) => CliError::Input(format!("{}: {io}", p.display())),
                    other => other.into(),
                })
            }
            None => Ok(seven_ion_chain()),
        }
    }
}

pub fn load_pulse(path: &Path, chain: &ChainSpec) -> Result<Pulse, CliError> {
    let pulse = Pulse::from_json(&read_text(path)?)?;
    if let Some(h) = &pulse.provenance.chain_sha256 {
        if *h != chain.content_hash() {
            eprintln!("warning: pulse was synthesized for a different chain (sha256 {h})");
        }
    }
    Ok(pulse)
}

pub fn parse_pair(s: &str, chain: &ChainSpec) -> Result<GatePair, CliError> {
    Ok(GatePair::parse(s, chain.n_ions())?)
}

/// Angles such as "pi/4", "-pi/8", "2pi/3", "0.785".
pub fn parse_angle(s: &str) -> Result<f64, CliError> {
    let bad = || CliError::Input(format!("cannot parse angle '{s}'"));
    let t = s.trim().replace(' ', "");
    let (sign, t) = match t.strip_prefix('-') {
        Some(rest) => (-1.0, rest.to_string()),
        None => (1.0, t),
    };
    let (num, den) = match t.split_once('/') {
        Some((a, b)) => (a.to_string(), b.parse::<f64>().map_err(|_| bad())?),
        None => (t.clone(), 1.0),
    };
    let value = if let Some(k) = num.strip_suffix("pi") {
        let k = if k.is_empty() { 1.0 } else { k.trim_end_matches('*').parse::<f64>().map_err(|_| bad())? };
        k * PI
    } else {
        num.parse::<f64>().map_err(|_| bad())?
    };
    let v = sign * value / den;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad())
    }
}

/// "LO,HI" tone range.
pub fn parse_basis(s: &str) -> Result<(u32, u32), CliError> {
    let bad = || CliError::Input(format!("basis must be 'LO,HI', got '{s}'"));
    let (a, b) = s.split_once(',').ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

/// "00", "01", "10" or "11".
pub fn parse_label(s: &str) -> Result<(u8, u8), CliError> {
    match s.trim() {
        "00" => Ok((0, 0)),
        "01" => Ok((0, 1)),
        "10" => Ok((1, 0)),
        "11" => Ok((1, 1)),
        other => Err(CliError::Input(format!("computational label must be 00, 01, 10 or 11, got '{other}'"))),
    }
}
