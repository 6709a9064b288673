//! Fixed-step RK4 propagation and phonon-scheme convergence.

use std::collections::HashMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::hamiltonian::{Hamiltonian, Workspace};
use super::{HamiltonianKind, HamiltonianSpec, JointState, PhononScheme};
use crate::chain::{ChainSpec, GatePair};
use crate::error::{Error, Result};
use crate::pulse::Pulse;
use crate::C64;

/// Norm drift above which a run aborts.
pub const NORM_GATE: f64 = 1e-5;
const NORM_CHECK_EVERY: usize = 256;

/// Largest step with ω_max·dt ≤ 2π/40 that divides τ evenly.
pub fn default_dt(h: &Hamiltonian) -> f64 {
    let tau = h.pulse().tau();
    let wmax = h.max_frequency().max(2.0 * PI / tau);
    tau / (tau * wmax * 40.0 / (2.0 * PI)).ceil()
}

/// Outcome of one propagation.
#[derive(Debug, Clone)]
pub struct Run {
    pub state: JointState,
    pub norm_drift: f64,
    pub steps: usize,
    pub dt: f64,
}

/// Step boundaries: ⌊τ/dt⌋ full steps plus a final partial step if needed.
fn step_grid(tau: f64, dt: f64) -> Vec<f64> {
    let full = (tau / dt * (1.0 + 1e-12)).floor() as usize;
    let mut t: Vec<f64> = (0..=full).map(|k| (k as f64 * dt).min(tau)).collect();
    if tau - t[full] > 1e-9 * dt {
        t.push(tau);
    } else {
        t[full] = tau;
    }
    t
}

/// Generic RK4 for iψ' = H(t)ψ with `apply(t, ψ, out)` computing H(t)ψ.
fn rk4<F>(psi: &mut [C64], tau: f64, dt: f64, mut apply: F) -> Result<(f64, usize)>
where
    F: FnMut(f64, &[C64], &mut [C64]),
{
    let n = psi.len();
    let zero = C64::new(0.0, 0.0);
    let norm0 = psi.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
        (vec![zero; n], vec![zero; n], vec![zero; n], vec![zero; n], vec![zero; n]);
    let grid = step_grid(tau, dt);
    let mi = C64::new(0.0, -1.0);
    let mut drift = 0.0;
    for (step, w) in grid.windows(2).enumerate() {
        let (t, h) = (w[0], w[1] - w[0]);
        apply(t, psi, &mut k1);
        for i in 0..n {
            tmp[i] = psi[i] + mi * k1[i] * (0.5 * h);
        }
        apply(t + 0.5 * h, &tmp, &mut k2);
        for i in 0..n {
            tmp[i] = psi[i] + mi * k2[i] * (0.5 * h);
        }
        apply(t + 0.5 * h, &tmp, &mut k3);
        for i in 0..n {
            tmp[i] = psi[i] + mi * k3[i] * h;
        }
        apply(t + h, &tmp, &mut k4);
        let c = mi * (h / 6.0);
        for i in 0..n {
            psi[i] += c * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
        }
        let last = step + 2 == grid.len();
        if last || (step + 1) % NORM_CHECK_EVERY == 0 {
            let norm = psi.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            drift = (norm - norm0).abs();
            if drift > NORM_GATE {
                return Err(Error::NormDrift { drift, t: w[1], limit: NORM_GATE, dt });
            }
        }
    }
    Ok((drift, grid.len() - 1))
}

/// Propagates ψ0 from 0 to τ under the Hamiltonian described by `spec`.
pub fn propagate(spec: &HamiltonianSpec, scheme: &PhononScheme, psi0: &JointState, dt: f64) -> Result<Run> {
    let h = Hamiltonian::new(spec, scheme)?;
    propagate_prepared(&h, psi0, dt)
}

/// Propagates several initial states with one prepared Hamiltonian.
pub fn propagate_many(
    spec: &HamiltonianSpec,
    scheme: &PhononScheme,
    psi0: &[JointState],
    dt: f64,
) -> Result<Vec<Run>> {
    let h = Hamiltonian::new(spec, scheme)?;
    psi0.iter().map(|p| propagate_prepared(&h, p, dt)).collect()
}

pub(crate) fn propagate_prepared(h: &Hamiltonian, psi0: &JointState, dt: f64) -> Result<Run> {
    if psi0.scheme() != h.scheme() {
        return Err(Error::Dimension(format!("state scheme {} vs Hamiltonian scheme {}", psi0.scheme(), h.scheme())));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("time step {dt:e}")));
    }
    let mut state = psi0.clone();
    let mut ws = Workspace::default();
    let (norm_drift, steps) = rk4(state.amplitudes_mut(), h.pulse().tau(), dt, |t, x, out| {
        h.apply_with(t, x, out, &mut ws)
    })?;
    Ok(Run { state, norm_drift, steps, dt })
}

/// Sectors (s₁, s₂) of σ_x ⊗ σ_x eigenvalues.
const SECTORS: [(f64, f64); 4] = [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)];

/// g(t) at every RK4 stage time of the (τ, dt) grid, keyed by the bits of t.
struct PulseSamples {
    tau: f64,
    dt: f64,
    g: HashMap<u64, f64>,
}

impl PulseSamples {
    fn new(pulse: &Pulse, dt: f64) -> Self {
        let mut g = HashMap::new();
        for w in step_grid(pulse.tau(), dt).windows(2) {
            let (t, h) = (w[0], w[1] - w[0]);
            for s in [t, t + 0.5 * h, t + h] {
                g.entry(s.to_bits()).or_insert_with(|| pulse.g(s));
            }
        }
        PulseSamples { tau: pulse.tau(), dt, g }
    }

    fn at(&self, t: f64) -> f64 {
        self.g[&t.to_bits()]
    }
}

/// Final single-mode states for the four σ_x sectors under H_S, which
/// factorizes into independent driven oscillators κ g(t)(a† e^{iωt} + h.c.),
/// κ = s₁η¹ + s₂η².
fn sector_mode_states(pulse: &PulseSamples, w: f64, eta: (f64, f64), m: u32) -> Result<[Vec<C64>; 4]> {
    let d = m as usize + 1;
    let mut out: [Vec<C64>; 4] = Default::default();
    for (k, &(s1, s2)) in SECTORS.iter().enumerate() {
        let kappa = s1 * eta.0 + s2 * eta.1;
        let mut psi = vec![C64::new(0.0, 0.0); d];
        psi[0] = C64::new(1.0, 0.0);
        rk4(&mut psi, pulse.tau, pulse.dt, |t, x, y| {
            let c = pulse.at(t) * kappa;
            let ph = C64::from_polar(1.0, w * t);
            for n in 0..d {
                let mut acc = C64::new(0.0, 0.0);
                if n > 0 {
                    acc += ph * (n as f64).sqrt() * x[n - 1];
                }
                if n + 1 < d {
                    acc += ph.conj() * ((n + 1) as f64).sqrt() * x[n + 1];
                }
                y[n] = c * acc;
            }
        })?;
        out[k] = psi;
    }
    Ok(out)
}

fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Process infidelity 1 − F_P against e^{iχσ_xσ_x} from per-mode sector states.
fn sector_infidelity(states: &[&[Vec<C64>; 4]], chi: f64) -> f64 {
    let amp: Vec<C64> = SECTORS.iter().map(|(s1, s2)| C64::from_polar(1.0, -chi * s1 * s2)).collect();
    let mut total = C64::new(0.0, 0.0);
    for s in 0..4 {
        for r in 0..4 {
            let overlap: C64 = states.iter().map(|st| inner(&st[r], &st[s])).product();
            total += amp[r].conj() * amp[s] * overlap;
        }
    }
    1.0 - total.re / 16.0
}

/// H_S process infidelity at `scheme` via the sector factorization.
pub fn hs_sector_infidelity(
    chain: &ChainSpec,
    pair: GatePair,
    pulse: &Pulse,
    scheme: &PhononScheme,
    dt: f64,
    chi: f64,
) -> Result<f64> {
    let (j1, j2) = pair.indices();
    let samples = PulseSamples::new(pulse, dt);
    let states = (0..chain.n_ions())
        .map(|p| {
            sector_mode_states(
                &samples,
                chain.mode_freqs()[p],
                (chain.eta(p, j1), chain.eta(p, j2)),
                scheme.max_occ()[p],
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(sector_infidelity(&states.iter().collect::<Vec<_>>(), chi))
}

/// Result of [`converge_scheme`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergedScheme {
    pub scheme: PhononScheme,
    pub infidelity: f64,
    /// (scheme, infidelity) after each accepted increment, starting at the base.
    pub history: Vec<(String, f64)>,
}

/// Convergence thresholds for [`converge_scheme`].
pub const SCHEME_STEP_TOL: f64 = 1e-5;
pub const SCHEME_INFIDELITY_TOL: f64 = 5e-5;

/// Greedily raises per-mode cutoffs until the H_S self-test infidelity is
/// below 5×10⁻⁵ and no single increment changes it by 10⁻⁵ or more.
pub fn converge_scheme(
    spec: &HamiltonianSpec,
    base: &PhononScheme,
    dt: f64,
    cap: usize,
    chi: f64,
) -> Result<ConvergedScheme> {
    if spec.kind != HamiltonianKind::HS {
        return Err(Error::InvalidArgument("scheme convergence runs the H_S self-test".into()));
    }
    if base.n_modes() != spec.chain.n_ions() {
        return Err(Error::Dimension(format!("scheme has {} modes, chain {}", base.n_modes(), spec.chain.n_ions())));
    }
    let (j1, j2) = spec.pair.indices();
    let samples = PulseSamples::new(&spec.pulse, dt);
    let mut cache: HashMap<(usize, u32), [Vec<C64>; 4]> = HashMap::new();
    let eval = |occ: &[u32], cache: &mut HashMap<(usize, u32), [Vec<C64>; 4]>| -> Result<f64> {
        for (p, &m) in occ.iter().enumerate() {
            if !cache.contains_key(&(p, m)) {
                let st = sector_mode_states(
                    &samples,
                    spec.chain.mode_freqs()[p],
                    (spec.chain.eta(p, j1), spec.chain.eta(p, j2)),
                    m,
                )?;
                cache.insert((p, m), st);
            }
        }
        let states: Vec<&[Vec<C64>; 4]> = occ.iter().enumerate().map(|(p, &m)| &cache[&(p, m)]).collect();
        Ok(sector_infidelity(&states, chi))
    };
    let mut scheme = base.clone();
    let mut inf = eval(scheme.max_occ(), &mut cache)?;
    let mut history = vec![(scheme.to_string(), inf)];
    loop {
        let mut best: Option<(PhononScheme, f64)> = None;
        let mut max_change: f64 = 0.0;
        for p in 0..scheme.n_modes() {
            let Ok(next) = scheme.incremented(p, cap) else { continue };
            let v = eval(next.max_occ(), &mut cache)?;
            max_change = max_change.max((v - inf).abs());
            if best.as_ref().map_or(true, |(_, b)| v < *b) {
                best = Some((next, v));
            }
        }
        if inf < SCHEME_INFIDELITY_TOL && max_change < SCHEME_STEP_TOL {
            return Ok(ConvergedScheme { scheme, infidelity: inf, history });
        }
        match best {
            Some((next, v)) => {
                scheme = next;
                inf = v;
                history.push((scheme.to_string(), inf));
            }
            None => return Err(Error::SchemeNotConverged { infidelity: inf }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_covers_tau() {
        let g = step_grid(1.0, 0.3);
        assert_eq!(g.len(), 5);
        assert_eq!(*g.last().unwrap(), 1.0);
        let g = step_grid(1.0, 0.25);
        assert_eq!(g, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn rk4_rotates_two_level_system() {
        // H = ω σ_x: |0⟩ → cos ωt|0⟩ − i sin ωt|1⟩
        let w = 3.0;
        let mut psi = vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
        rk4(&mut psi, 1.0, 1e-3, |_, x, y| {
            y[0] = w * x[1];
            y[1] = w * x[0];
        })
        .unwrap();
        assert!((psi[0] - C64::new(w.cos(), 0.0)).norm() < 1e-11);
        assert!((psi[1] - C64::new(0.0, -w.sin())).norm() < 1e-11);
    }

    #[test]
    fn norm_gate_trips_on_coarse_steps() {
        let mut psi = vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
        let err = rk4(&mut psi, 1.0, 0.5, |_, x, y| {
            y[0] = 10.0 * x[1];
            y[1] = 10.0 * x[0];
        });
        assert!(matches!(err, Err(Error::NormDrift { .. })));
    }
}
