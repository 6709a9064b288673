//! Magnus-expansion error diagnostics for one gate pulse.
//!
//! Every γ is a maximum of |η-product × spectral functional| over the gate
//! ions, a set of modes and the sign choices of the frequency combination.
//! The budget functions take the mode set explicitly (`*_over`) so that
//! restricting it can only lower a γ.
//!
//! The Φ-driven σ_xσ_z operator λ(σ_xσ_z + σ_zσ_x), λ = 4Φ, is the only
//! third-order term that survives for closure-satisfying pulses; its
//! infidelity on |00⟩ is 2(λ sin χ/χ)², i.e. (4λ/π)² at χ = π/4.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{ChainSpec, GatePair};
use crate::error::{Error, Result};
use crate::functionals::{g_big_g_series, sp_from_series};
use crate::integrals::{double, single, HarmonicSeries};
use crate::pulse::{chi_of, quadratic_form, synthesize_with, ModeKernels, Pulse, PulseBasis, SynthesisRequest};
use crate::C64;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// One part per ten thousand.
pub const PPTT: f64 = 1e-4;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FirstOrder {
    pub gamma2: f64,
    pub gamma3_plus: f64,
    pub gamma3_minus: f64,
    pub gamma4: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SecondOrder {
    pub gamma01: f64,
    pub gamma03_plus: f64,
    pub gamma03_minus: f64,
    pub gamma12_a: f64,
    pub gamma12_c: f64,
    pub gamma13_d: f64,
}

/// Magnitudes of the η³ and η⁴ coefficient integrals of the third-order
/// Magnus term. Each is the prefactor times the max over ions, modes and
/// signs of |η-product × integral|.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct HigherOrderControls {
    /// (1/9)|η³ ∫ g G² e^{iΣσω t}|.
    pub gamma003: f64,
    /// (1/6)|η³ ∫∫ g g G V V²| with one mode at one time and two at the other.
    pub gamma012: f64,
    /// (2/3)|η_p^{j1}η_p^{j2}η_q ∫∫ g g sin ω_p(t₁−t₂) [G(t₂)e^{iσω_q t₁} + G(t₁)e^{iσω_q t₂}]|.
    pub gamma012_yz: f64,
    /// (1/3)|η_p^{j1}η_p^{j2}η_qη_r ∫∫ g g sin ω_p(t₁−t₂) [G(t₁)V²(t₂) + G(t₂)V²(t₁)]|.
    pub gamma013: f64,
}

/// Scalar diagnostics of one pulse on one gate pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorBudget {
    pub gamma2: f64,
    pub gamma3_plus: f64,
    pub gamma3_minus: f64,
    pub gamma4: f64,
    pub gamma01: f64,
    pub gamma03_plus: f64,
    pub gamma03_minus: f64,
    pub gamma12_a: f64,
    pub gamma12_c: f64,
    pub gamma13_d: f64,
    pub gamma001: f64,
    pub higher_order: HigherOrderControls,
    /// Signed χ of the pulse, rad.
    pub chi: f64,
    /// rad, signed like χ.
    pub delta_chi_analytic: f64,
    pub phi_value: f64,
    pub lambda: f64,
    pub phi_infidelity: f64,
    /// Δχ² + phi_infidelity.
    pub total_estimate: f64,
    /// phi_infidelity alone: the estimate once calibration has removed Δχ.
    pub calibrated_estimate: f64,
}

impl ErrorBudget {
    pub fn new(chain: &ChainSpec, pair: GatePair, pulse: &Pulse) -> Self {
        let modes: Vec<usize> = (0..chain.n_ions()).collect();
        let f = first_order_over(chain, pair, pulse, &modes);
        let s = second_order_over(chain, pair, pulse, &modes);
        let chi = chi_of(chain, pair, pulse);
        let phi = phi_value(chain, pair, pulse);
        let dchi = delta_chi_analytic(chain, pair, chi);
        let phi_inf = phi_infidelity_from(phi, chi);
        ErrorBudget {
            gamma2: f.gamma2,
            gamma3_plus: f.gamma3_plus,
            gamma3_minus: f.gamma3_minus,
            gamma4: f.gamma4,
            gamma01: s.gamma01,
            gamma03_plus: s.gamma03_plus,
            gamma03_minus: s.gamma03_minus,
            gamma12_a: s.gamma12_a,
            gamma12_c: s.gamma12_c,
            gamma13_d: s.gamma13_d,
            gamma001: gamma001_over(chain, pair, pulse, &modes),
            higher_order: higher_order_over(chain, pair, pulse, &modes),
            chi,
            delta_chi_analytic: dchi,
            phi_value: phi,
            lambda: 4.0 * phi,
            phi_infidelity: phi_inf,
            total_estimate: dchi * dchi + phi_inf,
            calibrated_estimate: phi_inf,
        }
    }

    pub fn gammas(&self) -> Vec<(&'static str, f64)> {
        let h = &self.higher_order;
        vec![
            ("gamma2", self.gamma2),
            ("gamma3_plus", self.gamma3_plus),
            ("gamma3_minus", self.gamma3_minus),
            ("gamma4", self.gamma4),
            ("gamma01", self.gamma01),
            ("gamma03_plus", self.gamma03_plus),
            ("gamma03_minus", self.gamma03_minus),
            ("gamma12_a", self.gamma12_a),
            ("gamma12_c", self.gamma12_c),
            ("gamma13_d", self.gamma13_d),
            ("gamma001", self.gamma001),
            ("gamma003", h.gamma003),
            ("gamma012", h.gamma012),
            ("gamma012_yz", h.gamma012_yz),
            ("gamma013", h.gamma013),
        ]
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Malformed(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Malformed(e.to_string()))
    }
}

/// Multisets of size k drawn from `items`, as nondecreasing position tuples.
fn multisets(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    fn rec(items: &[usize], k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..items.len() {
            cur.push(items[i]);
            rec(items, k, i, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(items, k, 0, &mut Vec::with_capacity(k), &mut out);
    out
}

/// Σσ_iω_i over every sign vector with σ₀ = +1, tagged with whether the
/// signs are mixed. The functionals used here satisfy F(−w) = F(w)*, so the
/// other half of the sign vectors adds nothing to a max of magnitudes.
fn signed_sums(w: &[f64]) -> Vec<(f64, bool)> {
    let k = w.len();
    (0..1usize << (k - 1))
        .map(|mask| {
            let mut s = w[0];
            for (i, wi) in w.iter().enumerate().skip(1) {
                s += if mask >> (i - 1) & 1 == 1 { -wi } else { *wi };
            }
            (s, mask != 0)
        })
        .collect()
}

fn ions(pair: GatePair) -> [usize; 2] {
    let (a, b) = pair.indices();
    [a, b]
}

fn eta_product(chain: &ChainSpec, j: usize, modes: &[usize]) -> f64 {
    modes.iter().map(|&p| chain.eta(p, j)).product()
}

fn freqs(chain: &ChainSpec, modes: &[usize]) -> Vec<f64> {
    modes.iter().map(|&p| chain.mode_freqs()[p]).collect()
}

/// (max over all-same-sign sums, max over mixed-sign sums) of |η-product·F|.
fn plus_minus_max(
    chain: &ChainSpec,
    pair: GatePair,
    modes: &[usize],
    k: usize,
    f: impl Fn(f64) -> f64,
) -> (f64, f64) {
    let (mut plus, mut minus) = (0.0f64, 0.0f64);
    for m in multisets(modes, k) {
        let w = freqs(chain, &m);
        let etas: Vec<f64> = ions(pair).iter().map(|&j| eta_product(chain, j, &m).abs()).collect();
        let eta = etas.iter().copied().fold(0.0, f64::max);
        if eta == 0.0 {
            continue;
        }
        for (s, mixed) in signed_sums(&w) {
            let v = eta * f(s);
            if mixed {
                minus = minus.max(v);
            } else {
                plus = plus.max(v);
            }
        }
    }
    (plus, minus)
}

pub fn first_order_budget(chain: &ChainSpec, pair: GatePair, pulse: &Pulse) -> FirstOrder {
    first_order_over(chain, pair, pulse, &(0..chain.n_ions()).collect::<Vec<_>>())
}

/// γ₂, γ₃^{(±)}, γ₄ restricted to `modes` (0-based).
pub fn first_order_over(chain: &ChainSpec, pair: GatePair, pulse: &Pulse, modes: &[usize]) -> FirstOrder {
    // exact harmonic-series integrals; no pole handling needed
    let g = pulse.g_series();
    let q = |w: f64| single(&g, w).norm();
    let (p2, m2) = plus_minus_max(chain, pair, modes, 2, q);
    let (p3, m3) = plus_minus_max(chain, pair, modes, 3, q);
    let (p4, m4) = plus_minus_max(chain, pair, modes, 4, q);
    FirstOrder { gamma2: p2.max(m2), gamma3_plus: p3 / 6.0, gamma3_minus: m3 / 6.0, gamma4: p4.max(m4) }
}

pub fn second_order_budget(chain: &ChainSpec, pair: GatePair, pulse: &Pulse) -> SecondOrder {
    second_order_over(chain, pair, pulse, &(0..chain.n_ions()).collect::<Vec<_>>())
}

/// γ₀₁, γ₀₃^{(±)}, γ₁₂^{(a)}, γ₁₂^{(c)}, γ₁₃^{(d)} restricted to `modes`.
pub fn second_order_over(chain: &ChainSpec, pair: GatePair, pulse: &Pulse, modes: &[usize]) -> SecondOrder {
    let g = pulse.g_series();
    let gg = g_big_g_series(pulse);
    let f = |w: f64| single(&gg, w).norm();
    let (g01, _) = plus_minus_max(chain, pair, modes, 1, f);
    let (p3, m3) = plus_minus_max(chain, pair, modes, 3, f);
    let w = chain.mode_freqs();
    let js = ions(pair);

    let mut g12a = 0.0f64;
    for &p in modes {
        for qr in multisets(modes, 2) {
            let (q, r) = (qr[0], qr[1]);
            for j in js {
                let eta = (chain.eta(p, j) * chain.eta(q, j) * chain.eta(r, j)).abs();
                if eta == 0.0 {
                    continue;
                }
                for sq in [1.0, -1.0] {
                    for sr in [1.0, -1.0] {
                        let z = double(&g, w[p], &g, sq * w[q] + sr * w[r]);
                        g12a = g12a.max(eta * z.norm());
                    }
                }
            }
        }
    }

    let mut g12c = 0.0f64;
    for (j, k) in [(js[0], js[1]), (js[1], js[0])] {
        for &p in modes {
            for &q in modes {
                let eta = (chain.eta(p, j) * chain.eta(p, k) * chain.eta(q, k)).abs();
                if eta > 0.0 {
                    g12c = g12c.max(eta * sp_from_series(&g, w[p], w[q]).norm());
                }
            }
        }
    }

    let mut g13d = 0.0f64;
    for &p in modes {
        for &q in modes {
            for &r in modes {
                for sigma in [1.0, -1.0] {
                    let eta = js
                        .iter()
                        .map(|&j| (chain.eta(p, j).powi(2) * chain.eta(q, j) * chain.eta(r, j)).abs())
                        .fold(0.0, f64::max);
                    if eta > 0.0 {
                        g13d = g13d.max(eta * sp_from_series(&g, w[p], w[q] + sigma * w[r]).norm());
                    }
                }
            }
        }
    }

    SecondOrder {
        gamma01: g01,
        gamma03_plus: p3 / 6.0,
        gamma03_minus: m3 / 6.0,
        gamma12_a: g12a,
        gamma12_c: g12c,
        gamma13_d: g13d,
    }
}

/// γ₀₀₁ = max |η_p^j J_p| over `modes`.
pub fn gamma001_over(chain: &ChainSpec, pair: GatePair, pulse: &Pulse, modes: &[usize]) -> f64 {
    let gg = g_big_g_series(pulse);
    let ggg = gg.mul(&pulse.big_g_series());
    let (v, _) = plus_minus_max(chain, pair, modes, 1, |w| single(&ggg, w).norm());
    v
}

/// ∫∫_{t₂<t₁} h₁(t₁)h₂(t₂) sin[ω(t₁−t₂)] e^{i(w₁t₁ + w₂t₂)}.
fn sin_kernel(h1: &HarmonicSeries, w1: f64, h2: &HarmonicSeries, w2: f64, omega: f64) -> C64 {
    (double(h1, w1 + omega, h2, w2 - omega) - double(h1, w1 - omega, h2, w2 + omega)) / (2.0 * I)
}

/// η³ and η⁴ coefficient magnitudes restricted to `modes`.
pub fn higher_order_over(chain: &ChainSpec, pair: GatePair, pulse: &Pulse, modes: &[usize]) -> HigherOrderControls {
    let g = pulse.g_series();
    let gg = g_big_g_series(pulse);
    let ggg = gg.mul(&pulse.big_g_series());
    let w = chain.mode_freqs();
    let js = ions(pair);
    let (j1, j2) = pair.indices();

    let (p3, m3) = plus_minus_max(chain, pair, modes, 3, |s| single(&ggg, s).norm());
    let gamma003 = p3.max(m3) / 9.0;

    let mut g012 = 0.0f64;
    let mut g013 = 0.0f64;
    for qr in multisets(modes, 2) {
        let (q, r) = (qr[0], qr[1]);
        for sq in [1.0, -1.0] {
            for sr in [1.0, -1.0] {
                let big_w = sq * w[q] + sr * w[r];
                for &p in modes {
                    let eta3 = js
                        .iter()
                        .map(|&j| (chain.eta(p, j) * chain.eta(q, j) * chain.eta(r, j)).abs())
                        .fold(0.0, f64::max);
                    if eta3 > 0.0 {
                        // pair of modes at t₁, G and the single mode at t₂, and the mirror
                        let a = double(&g, big_w, &gg, w[p]);
                        let b = double(&gg, w[p], &g, big_w);
                        g012 = g012.max(eta3 * a.norm().max(b.norm()));
                    }
                    let eta4 = (chain.eta(p, j1) * chain.eta(p, j2)).abs()
                        * js.iter().map(|&j| (chain.eta(q, j) * chain.eta(r, j)).abs()).fold(0.0, f64::max);
                    if eta4 > 0.0 {
                        let k = sin_kernel(&gg, 0.0, &g, big_w, w[p]) + sin_kernel(&g, big_w, &gg, 0.0, w[p]);
                        g013 = g013.max(eta4 * k.norm());
                    }
                }
            }
        }
    }

    let mut g012yz = 0.0f64;
    for &p in modes {
        let epp = (chain.eta(p, j1) * chain.eta(p, j2)).abs();
        if epp == 0.0 {
            continue;
        }
        for &q in modes {
            let eq = js.iter().map(|&j| chain.eta(q, j).abs()).fold(0.0, f64::max);
            for sq in [1.0, -1.0] {
                let k = sin_kernel(&g, sq * w[q], &gg, 0.0, w[p]) + sin_kernel(&gg, 0.0, &g, sq * w[q], w[p]);
                g012yz = g012yz.max(epp * eq * k.norm());
            }
        }
    }

    HigherOrderControls {
        gamma003,
        gamma012: g012 / 6.0,
        gamma012_yz: 2.0 * g012yz / 3.0,
        gamma013: g013 / 3.0,
    }
}

/// Δχ = −(χ/2) Σ_{j∈pair, p} (η_p^j)², independent of the pulse shape.
pub fn delta_chi_analytic(chain: &ChainSpec, pair: GatePair, chi: f64) -> f64 {
    -0.5 * chi * chain.pair_eta_square_sum(pair)
}

/// Φ from the closed form (χτ/4π) Σ B_n/n, with χ from the pulse.
///
/// A sum no larger than its own rounding bound, n·ε·Σ|B_n/n|, is returned
/// as exactly zero.
pub fn phi_value(chain: &ChainSpec, pair: GatePair, pulse: &Pulse) -> f64 {
    let terms: Vec<f64> = pulse.basis().indices().zip(&pulse.coeffs).map(|(n, b)| b / n as f64).collect();
    let sum: f64 = terms.iter().sum();
    let bound = terms.len() as f64 * f64::EPSILON * terms.iter().map(|x| x.abs()).sum::<f64>();
    if sum.abs() <= bound {
        return 0.0;
    }
    chi_of(chain, pair, pulse) * pulse.tau() / (4.0 * PI) * sum
}

/// 2(λ sin χ/χ)² with λ = 4Φ.
pub fn phi_infidelity_from(phi: f64, chi: f64) -> f64 {
    let lambda = 4.0 * phi;
    let sinc = if chi == 0.0 { 1.0 } else { chi.sin() / chi };
    2.0 * (lambda * sinc).powi(2)
}

/// Infidelity of the σ_xσ_z error operator on |00⟩|0⟩ at gate angle `chi`.
pub fn phi_infidelity(chain: &ChainSpec, pair: GatePair, pulse: &Pulse, chi: f64) -> f64 {
    phi_infidelity_from(phi_value(chain, pair, pulse), chi)
}

/// Δχ² + Φ-infidelity at the pulse's own χ.
pub fn total_estimate(chain: &ChainSpec, pair: GatePair, pulse: &Pulse) -> f64 {
    let chi = chi_of(chain, pair, pulse);
    delta_chi_analytic(chain, pair, chi).powi(2) + phi_infidelity(chain, pair, pulse, chi)
}

/// Settings for [`sweep_phi_histogram`].
#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub tau: f64,
    /// Every pair; otherwise nearest neighbours (j, j+1) only.
    pub all_pairs: bool,
    pub enforce_phi: bool,
    pub basis: Option<(u32, u32)>,
    pub jobs: usize,
}

impl SweepOptions {
    pub fn new(tau: f64) -> Self {
        SweepOptions { tau, all_pairs: true, enforce_phi: false, basis: None, jobs: 1 }
    }
}

/// One sweep row. `error` is set when synthesis failed for the pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub ion1: usize,
    pub ion2: usize,
    pub chi: Option<f64>,
    pub phi_value: Option<f64>,
    pub phi_infidelity: Option<f64>,
    pub error: Option<String>,
}

impl SweepRow {
    pub fn pair(&self, n: usize) -> Result<GatePair> {
        GatePair::new(self.ion1, self.ion2, n)
    }
}

pub fn sweep_pairs(n: usize, all_pairs: bool) -> Vec<GatePair> {
    if all_pairs {
        GatePair::all(n)
    } else {
        (1..n).map(|j| GatePair::new(j, j + 1, n).expect("adjacent ions")).collect()
    }
}

/// Synthesizes an uncalibrated pulse per pair and records its Φ-infidelity.
/// Rows come back in pair order for any `jobs`.
pub fn sweep_phi_histogram(chain: &ChainSpec, opts: &SweepOptions) -> Result<Vec<SweepRow>> {
    if chain.n_ions() < 2 {
        return Err(Error::InvalidArgument("sweep needs at least 2 ions".into()));
    }
    let basis = match opts.basis {
        Some((lo, hi)) => PulseBasis::new(opts.tau, lo, hi)?,
        None => PulseBasis::default_for(chain, opts.tau)?,
    };
    let kernels = ModeKernels::new(chain, basis);
    let pairs = sweep_pairs(chain.n_ions(), opts.all_pairs);
    let row = |pair: &GatePair| -> SweepRow {
        let (ion1, ion2) = pair.ions();
        let mut req = SynthesisRequest::new(chain.clone(), *pair, opts.tau).with_phi(opts.enforce_phi);
        req.basis = Some((basis.n_min, basis.n_max));
        match synthesize_with(&req, &kernels) {
            Ok(pulse) => {
                let chi = quadratic_form(&kernels.chi_kernel(chain, *pair), &pulse.coeffs);
                let phi = phi_value(chain, *pair, &pulse);
                SweepRow {
                    ion1,
                    ion2,
                    chi: Some(chi),
                    phi_value: Some(phi),
                    phi_infidelity: Some(phi_infidelity_from(phi, chi)),
                    error: None,
                }
            }
            Err(e) => SweepRow { ion1, ion2, chi: None, phi_value: None, phi_infidelity: None, error: Some(e.to_string()) },
        }
    };
    if opts.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.jobs)
            .build()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Ok(pool.install(|| pairs.par_iter().map(row).collect()))
    } else {
        Ok(pairs.iter().map(row).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    /// pptt.
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub count: usize,
}

/// Bins infidelities (dimensionless) into [k·w, (k+1)·w) pptt bins covering
/// zero to the largest value.
pub fn histogram(values: &[f64], bin_width_pptt: f64) -> Result<Vec<HistogramBin>> {
    if !(bin_width_pptt > 0.0 && bin_width_pptt.is_finite()) {
        return Err(Error::InvalidArgument("bin width must be positive".into()));
    }
    if let Some(bad) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::InvalidArgument(format!("infidelity {bad} is not a finite non-negative number")));
    }
    let idx = |v: f64| (v / PPTT / bin_width_pptt).floor() as usize;
    let nbins = values.iter().map(|&v| idx(v) + 1).max().unwrap_or(1);
    let mut bins: Vec<HistogramBin> = (0..nbins)
        .map(|k| HistogramBin {
            bin_lo: k as f64 * bin_width_pptt,
            bin_hi: (k + 1) as f64 * bin_width_pptt,
            count: 0,
        })
        .collect();
    for &v in values {
        bins[idx(v)].count += 1;
    }
    Ok(bins)
}
