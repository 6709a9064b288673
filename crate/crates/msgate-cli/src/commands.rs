use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use msgate::chain::{ChainSpec, GatePair};
use msgate::fidelity::{
    calibrate as calibrate_pulse, extract_chi, gate_channel, gate_channel_with_first, rotation_error, state_fidelity,
    ChannelMode, ChiEstimate, FidelityReport,
};
use msgate::fock::{
    converge_scheme, default_dt, propagate, Hamiltonian, HamiltonianKind, HamiltonianSpec, JointState, PhononScheme,
    DEFAULT_DIM_CAP,
};
use msgate::functionals::{eval_big_g, eval_chi_tilde, eval_f, eval_jp, eval_phi, eval_q, eval_sp, eval_z, chi_from_sp};
use msgate::magnus::{histogram, sweep_phi_histogram, ErrorBudget, SweepOptions, PPTT};
use msgate::pulse::{chi_of, synthesize, ChiSignPolicy, Pulse, SynthesisRequest};
use msgate::C64;
use serde::Serialize;

use crate::inputs::{load_pulse, parse_angle, parse_basis, parse_label, parse_pair, read_text};
use crate::manifest::{write_text, RunManifest};
use crate::{
    AuditArgs, CalibrateArgs, CliError, FidelityArgs, FunctionalsArgs, Mode, SignPolicy, SimArgs, SimulateArgs,
    SweepArgs, SynthArgs,
};

fn output(m: &mut RunManifest, path: &Path, text: &str) -> Result<(), CliError> {
    write_text(path, text)?;
    m.outputs.push(path.display().to_string());
    Ok(())
}

fn write_csv<T: Serialize>(m: &mut RunManifest, path: &Path, rows: &[T]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Output(format!("{}: {e}", path.display())))?;
    output(m, path, &String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report serializes")
}

fn positive(v: f64, what: &str) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Input(format!("{what} must be positive, got {v}")))
    }
}

pub fn synth(a: &SynthArgs, m: &mut RunManifest) -> Result<(), CliError> {
    let chain = a.chain.load()?;
    let pair = parse_pair(&a.pair, &chain)?;
    let chi = parse_angle(&a.chi)?;
    if chi <= 0.0 {
        return Err(CliError::Input("--chi is a magnitude and must be positive".into()));
    }
    let mut req = SynthesisRequest::new(chain.clone(), pair, positive(a.tau_us, "--tau-us")? * 1e-6).with_phi(a.phi);
    req.chi_target = chi;
    req.sign_policy = match a.sign_policy {
        SignPolicy::Positive => ChiSignPolicy::Positive,
        SignPolicy::LargestMagnitude => ChiSignPolicy::LargestMagnitude,
    };
    if let Some(b) = &a.basis {
        let (lo, hi) = parse_basis(b)?;
        req = req.with_basis(lo, hi);
    }
    let pulse = synthesize(&req)?;
    m.chain_sha256 = Some(chain.content_hash());
    m.pulse_sha256 = Some(pulse.content_hash());
    output(m, &a.out, &pulse.to_json())?;
    println!(
        "tones {}..{}  |B| {:e} rad/s  chi {:+e}  sum B_n/n {:e}",
        pulse.n_min,
        pulse.n_max,
        pulse.coeff_norm(),
        chi_of(&chain, pair, &pulse),
        pulse.phi_sum()
    );
    Ok(())
}

struct Prepared {
    spec: HamiltonianSpec,
    scheme: PhononScheme,
    dt: f64,
}

fn resolve_scheme(spec: &HamiltonianSpec, text: &str) -> Result<PhononScheme, CliError> {
    if text.trim() != "auto" {
        let s = PhononScheme::parse(text)?;
        if s.n_modes() != spec.chain.n_ions() {
            return Err(CliError::Input(format!("scheme has {} modes, chain has {}", s.n_modes(), spec.chain.n_ions())));
        }
        return Ok(s);
    }
    let hs = spec.with_kind(HamiltonianKind::HS);
    let base = PhononScheme::uniform(spec.chain.n_ions(), 1)?;
    let dt = default_dt(&Hamiltonian::new(&hs, &base)?);
    let chi = chi_of(&spec.chain, spec.pair, &spec.pulse);
    let conv = converge_scheme(&hs, &base, dt, DEFAULT_DIM_CAP, chi)?;
    eprintln!("scheme {} (H_S self-test infidelity {:e})", conv.scheme, conv.infidelity);
    Ok(conv.scheme)
}

fn prepare(a: &SimArgs, m: &mut RunManifest) -> Result<Prepared, CliError> {
    let chain = a.chain.load()?;
    let pair = parse_pair(&a.pair, &chain)?;
    let pulse = load_pulse(&a.pulse, &chain)?;
    m.chain_sha256 = Some(chain.content_hash());
    m.pulse_sha256 = Some(pulse.content_hash());
    prepare_with(chain, pair, pulse, &a.ham, &a.scheme, a.dt_ns)
}

fn prepare_with(
    chain: ChainSpec,
    pair: GatePair,
    pulse: Pulse,
    ham: &str,
    scheme: &str,
    dt_ns: Option<f64>,
) -> Result<Prepared, CliError> {
    let kind = HamiltonianKind::parse(ham)?;
    let spec = HamiltonianSpec::new(kind, chain, pair, pulse);
    let scheme = resolve_scheme(&spec, scheme)?;
    let dt = match dt_ns {
        Some(ns) => positive(ns, "--dt-ns")? * 1e-9,
        None => default_dt(&Hamiltonian::new(&spec, &scheme)?),
    };
    Ok(Prepared { spec, scheme, dt })
}

#[derive(Serialize)]
struct RunSummary {
    scheme: String,
    dt_s: f64,
    steps: usize,
    norm_drift: f64,
    excited_population: f64,
    chi: Option<ChiEstimate>,
}

pub fn simulate(a: &SimulateArgs, m: &mut RunManifest) -> Result<(), CliError> {
    let (x, y) = parse_label(&a.psi0)?;
    let p = prepare(&a.sim, m)?;
    let psi0 = JointState::basis(&p.scheme, x, y);
    let run = propagate(&p.spec, &p.scheme, &psi0, p.dt)?;
    output(m, &a.out, &run.state.to_json())?;
    let summary = RunSummary {
        scheme: p.scheme.to_string(),
        dt_s: run.dt,
        steps: run.steps,
        norm_drift: run.norm_drift,
        excited_population: run.state.excited_population(),
        chi: if (x, y) == (0, 0) { extract_chi(&run.state).ok() } else { None },
    };
    println!("{}", json(&summary));
    Ok(())
}

#[derive(Serialize)]
struct StateReport {
    chi_target: f64,
    chi: f64,
    delta_chi: f64,
    leakage: f64,
    state_fidelity: f64,
    state_infidelity: f64,
}

fn channel_mode(mode: Mode) -> ChannelMode {
    match mode {
        Mode::Traced => ChannelMode::Traced,
        Mode::Vacuum => ChannelMode::VacuumConditioned,
    }
}

pub fn fidelity(a: &FidelityArgs, jobs: usize, m: &mut RunManifest) -> Result<(), CliError> {
    let chi = parse_angle(&a.chi)?;
    let text = if !a.state.is_empty() {
        let states = a
            .state
            .iter()
            .map(|p| Ok(JointState::from_json(&read_text(p)?)?))
            .collect::<Result<Vec<_>, CliError>>()?;
        match states.len() {
            1 => {
                let est = extract_chi(&states[0])?;
                let fs = state_fidelity(&states[0], chi, [C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)]);
                json(&StateReport {
                    chi_target: chi,
                    chi: est.chi,
                    delta_chi: rotation_error(est.chi, chi),
                    leakage: est.leakage,
                    state_fidelity: fs,
                    state_infidelity: 1.0 - fs,
                })
            }
            4 => json(&FidelityReport::new(&states, chi, channel_mode(a.mode))?),
            n => return Err(CliError::Input(format!("give one state (00 input) or four (00, 01, 10, 11), not {n}"))),
        }
    } else {
        let pulse_path = a
            .pulse
            .as_ref()
            .ok_or_else(|| CliError::Input("need --state files or --pulse with --pair".into()))?;
        let pair_text = a.pair.as_ref().ok_or_else(|| CliError::Input("--pulse needs --pair".into()))?;
        let chain = a.chain.load()?;
        let pair = parse_pair(pair_text, &chain)?;
        let pulse = load_pulse(pulse_path, &chain)?;
        m.chain_sha256 = Some(chain.content_hash());
        m.pulse_sha256 = Some(pulse.content_hash());
        let p = prepare_with(chain, pair, pulse, &a.ham, &a.scheme, a.dt_ns)?;
        let ch = gate_channel(&p.spec, &p.scheme, p.dt, channel_mode(a.mode), jobs)?;
        json(&FidelityReport::new(&ch.states(), chi, channel_mode(a.mode))?)
    };
    match &a.out {
        Some(path) => output(m, path, &text)?,
        None => println!("{text}"),
    }
    Ok(())
}

#[derive(Serialize)]
struct CalibrationReport {
    scheme: String,
    dt_s: f64,
    factor: f64,
    chi_trajectory: Vec<f64>,
    fidelity: FidelityReport,
}

pub fn calibrate(a: &CalibrateArgs, jobs: usize, m: &mut RunManifest) -> Result<(), CliError> {
    let p = prepare(&a.sim, m)?;
    let pulse = &p.spec.pulse;
    let target = match &a.chi {
        Some(s) => parse_angle(s)?,
        None => pulse.chi_sign as f64 * pulse.provenance.chi_target.unwrap_or(PI / 4.0),
    };
    let cal = calibrate_pulse(&p.spec, &p.scheme, p.dt, target, a.max_iters)?;
    m.pulse_sha256 = Some(cal.pulse.content_hash());
    output(m, &a.out, &cal.pulse.to_json())?;
    println!("factor {}  chi trajectory {:?}", cal.factor, cal.trajectory);
    if let Some(path) = &a.report {
        let spec = p.spec.with_pulse(cal.pulse.clone());
        let ch = if jobs > 1 {
            gate_channel(&spec, &p.scheme, p.dt, ChannelMode::Traced, jobs)?
        } else {
            gate_channel_with_first(&spec, &p.scheme, p.dt, ChannelMode::Traced, cal.run.clone())?
        };
        let report = CalibrationReport {
            scheme: p.scheme.to_string(),
            dt_s: p.dt,
            factor: cal.factor,
            chi_trajectory: cal.trajectory.clone(),
            fidelity: FidelityReport::new(&ch.states(), target, ChannelMode::Traced)?,
        };
        output(m, path, &json(&report))?;
    }
    Ok(())
}

pub fn audit(a: &AuditArgs, m: &mut RunManifest) -> Result<(), CliError> {
    let chain = a.chain.load()?;
    let pair = parse_pair(&a.pair, &chain)?;
    let pulse = load_pulse(&a.pulse, &chain)?;
    m.chain_sha256 = Some(chain.content_hash());
    m.pulse_sha256 = Some(pulse.content_hash());
    let b = ErrorBudget::new(&chain, pair, &pulse);
    for (name, v) in b.gammas() {
        println!("{name:<14} {v:e}");
    }
    println!("{:<14} {:e}", "delta_chi", b.delta_chi_analytic);
    println!("{:<14} {:e}", "lambda", b.lambda);
    println!("{:<14} {:e}", "phi_infidelity", b.phi_infidelity);
    println!("{:<14} {:e}", "total", b.total_estimate);
    if let Some(path) = &a.out {
        output(m, path, &b.to_json()?)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct PairCsv {
    ion1: usize,
    ion2: usize,
    chi: Option<f64>,
    phi_value: Option<f64>,
    phi_infidelity: Option<f64>,
    phi_infidelity_pptt: Option<f64>,
    error: Option<String>,
}

fn rows_path(histogram: &Path) -> PathBuf {
    let stem = histogram.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "sweep".into());
    histogram.with_file_name(format!("{stem}_pairs.csv"))
}

pub fn sweep(a: &SweepArgs, jobs: usize, m: &mut RunManifest) -> Result<(), CliError> {
    let chain = a.chain.load()?;
    m.chain_sha256 = Some(chain.content_hash());
    let mut opts = SweepOptions::new(positive(a.tau_us, "--tau-us")? * 1e-6);
    opts.all_pairs = !a.neighbours;
    opts.enforce_phi = a.phi;
    opts.jobs = jobs;
    opts.basis = a.basis.as_deref().map(parse_basis).transpose()?;
    positive(a.bin_width, "--bin-width")?;
    let rows = sweep_phi_histogram(&chain, &opts)?;
    let values: Vec<f64> = rows.iter().filter_map(|r| r.phi_infidelity).collect();
    let bins = histogram(&values, a.bin_width)?;
    write_csv(m, &a.histogram, &bins)?;
    let csv_rows: Vec<PairCsv> = rows
        .iter()
        .map(|r| PairCsv {
            ion1: r.ion1,
            ion2: r.ion2,
            chi: r.chi,
            phi_value: r.phi_value,
            phi_infidelity: r.phi_infidelity,
            phi_infidelity_pptt: r.phi_infidelity.map(|v| v / PPTT),
            error: r.error.clone(),
        })
        .collect();
    write_csv(m, &a.rows.clone().unwrap_or_else(|| rows_path(&a.histogram)), &csv_rows)?;
    let failed = rows.len() - values.len();
    let max = values.iter().copied().fold(0.0, f64::max);
    println!("{} pairs, {} failed, max Φ-infidelity {} pptt", rows.len(), failed, max / PPTT);
    Ok(())
}

#[derive(Serialize)]
struct FunctionalRow {
    name: &'static str,
    /// 1-based mode, when the entry belongs to one.
    mode: Option<usize>,
    arg_rad_s: Option<f64>,
    re: f64,
    im: f64,
}

pub fn functionals(a: &FunctionalsArgs, m: &mut RunManifest) -> Result<(), CliError> {
    let chain = a.chain.load()?;
    let pair = parse_pair(&a.pair, &chain)?;
    let pulse = load_pulse(&a.pulse, &chain)?;
    m.chain_sha256 = Some(chain.content_hash());
    m.pulse_sha256 = Some(pulse.content_hash());
    let real = |name, v: f64| FunctionalRow { name, mode: None, arg_rad_s: None, re: v, im: 0.0 };
    let mut rows = vec![real("G(tau)", eval_big_g(&pulse, pulse.tau())?)];
    for (p, &w) in chain.mode_freqs().iter().enumerate() {
        let row = |name, arg: f64, v: C64| FunctionalRow { name, mode: Some(p + 1), arg_rad_s: Some(arg), re: v.re, im: v.im };
        rows.push(row("Q", w, eval_q(&pulse, w).value));
        rows.push(row("f", w, eval_f(&pulse, w).value));
        rows.push(row("S_p(0)", 0.0, eval_sp(&pulse, w, 0.0).value));
        rows.push(row("J_p", w, eval_jp(&pulse, w).value));
        rows.push(row("Z(w,-w)", w, eval_z(&pulse, w, -w).value));
    }
    let phi = eval_phi(&chain, pair, &pulse);
    rows.push(real("phi_closed_form", phi.closed_form));
    rows.push(real("phi_double_integral", phi.double_integral));
    rows.push(real("chi_kernel", chi_of(&chain, pair, &pulse)));
    rows.push(real("chi_from_sp", chi_from_sp(&chain, pair, &pulse)));
    rows.push(real("chi_tilde", eval_chi_tilde(&chain, pair, &pulse)));
    println!("{:<20} {:>4} {:>24} {:>24} {:>24}", "name", "mode", "arg_rad_s", "re", "im");
    for r in &rows {
        let mode = r.mode.map(|x| x.to_string()).unwrap_or_default();
        let arg = r.arg_rad_s.map(|x| format!("{x:e}")).unwrap_or_default();
        println!("{:<20} {:>4} {:>24} {:>24e} {:>24e}", r.name, mode, arg, r.re, r.im);
    }
    if let Some(path) = &a.out {
        write_csv(m, path, &rows)?;
    }
    Ok(())
}
