//! Analytic functionals of a pulse: G, Q, f, S_p, J_p, Z, Φ and χ̃.
//!
//! Each has a closed form and a quadrature oracle in [`oracle`]. Q and f use
//! the textbook pole-fraction sums and switch to quadrature near their
//! removable singularities; the remaining double integrals go through the
//! divided-difference engine in [`crate::integrals`], which has no poles.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::chain::{ChainSpec, GatePair};
use crate::error::{Error, Result};
use crate::integrals::{double, single, HarmonicSeries};
use crate::pulse::{chi_of, Pulse};
use crate::C64;

const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    Quadrature,
}

/// A functional value with the method that produced it and an absolute error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionalValue {
    pub value: C64,
    pub method: Method,
    pub est_error: f64,
}

impl FunctionalValue {
    fn closed(value: C64, scale: f64) -> Self {
        FunctionalValue { value, method: Method::ClosedForm, est_error: 64.0 * f64::EPSILON * scale }
    }

    fn quad(e: crate::quadrature::Estimate) -> Self {
        FunctionalValue { value: e.value, method: Method::Quadrature, est_error: e.error }
    }
}

/// Minimum distance of an argument from a pole of the Q and f sums,
/// relative to the tone spacing 2π/τ.
pub const POLE_GUARD: f64 = 1e-3;

fn pole_eps(pulse: &Pulse) -> f64 {
    POLE_GUARD * 2.0 * PI / pulse.tau()
}

fn magnitude(pulse: &Pulse) -> f64 {
    pulse.coeffs.iter().map(|b| b.abs()).sum::<f64>() * pulse.tau()
}

/// G(t) = ∫₀^t g.
pub fn eval_big_g(pulse: &Pulse, t: f64) -> Result<f64> {
    check_time(pulse, t)?;
    Ok(pulse.big_g(t))
}

/// g(t).
pub fn eval_g(pulse: &Pulse, t: f64) -> Result<f64> {
    check_time(pulse, t)?;
    Ok(pulse.g(t))
}

fn check_time(pulse: &Pulse, t: f64) -> Result<()> {
    if !(0.0..=pulse.tau()).contains(&t) {
        return Err(Error::TimeOutOfRange { t, tau: pulse.tau() });
    }
    Ok(())
}

/// Q(w) = ∫₀^τ g(t)e^{iwt}dt = (e^{iwτ} − 1) Σ B_n ω_n/(w² − ω_n²).
pub fn eval_q(pulse: &Pulse, w: f64) -> FunctionalValue {
    let eps = pole_eps(pulse);
    if pulse.tones().any(|(_, wn, _)| (w.abs() - wn).abs() < eps) {
        return FunctionalValue::quad(oracle::q(pulse, w));
    }
    let sum: f64 = pulse.tones().map(|(_, wn, b)| b * wn / (w * w - wn * wn)).sum();
    let pre = C64::from_polar(1.0, w * pulse.tau()) - 1.0;
    FunctionalValue::closed(pre * sum, magnitude(pulse))
}

/// f(w) = ∫₀^τ g(t)G(t)e^{iwt}dt.
///
/// The constant part of G contributes (Σ B_n/ω_n)·Q(w), which the bare
/// pole-fraction sum in [`f_pole_fraction_form`] leaves out; the two agree
/// only when Σ B_n/ω_n = 0.
pub fn eval_f(pulse: &Pulse, w: f64) -> FunctionalValue {
    let eps = pole_eps(pulse);
    let tones: Vec<(f64, f64)> = pulse.tones().map(|(_, wn, b)| (wn, b)).collect();
    let near = tones.iter().any(|&(wn, _)| {
        (w.abs() - wn).abs() < eps
            || tones.iter().any(|&(wm, _)| {
                (w.abs() - (wm + wn)).abs() < eps || (wm != wn && (w.abs() - (wm - wn).abs()).abs() < eps)
            })
    });
    if near {
        return FunctionalValue::quad(oracle::f(pulse, w));
    }
    let mean: f64 = tones.iter().map(|&(wn, b)| b / wn).sum();
    let q: f64 = tones.iter().map(|&(wn, b)| b * wn / (w * w - wn * wn)).sum();
    let pre = C64::from_polar(1.0, w * pulse.tau()) - 1.0;
    let value = f_pole_fraction_form(pulse, w) + pre * (mean * q);
    let g = pulse.coeffs.iter().map(|b| b.abs()).sum::<f64>();
    FunctionalValue::closed(value, magnitude(pulse) * g * pulse.tau())
}

/// ½(e^{iwτ} − 1) Σ_{nm} (B_n B_m/ω_n)[(ω_m − ω_n)/((ω_m − ω_n)² − w²) + (ω_m + ω_n)/((ω_m + ω_n)² − w²)],
/// the m = n difference term taken as zero.
pub fn f_pole_fraction_form(pulse: &Pulse, w: f64) -> C64 {
    let w2 = w * w;
    let mut sum = 0.0;
    for (_, wn, bn) in pulse.tones() {
        for (_, wm, bm) in pulse.tones() {
            let d = wm - wn;
            let s = wm + wn;
            let diff = if d == 0.0 { 0.0 } else { d / (d * d - w2) };
            sum += bn * bm / wn * (diff + s / (s * s - w2));
        }
    }
    0.5 * (C64::from_polar(1.0, w * pulse.tau()) - 1.0) * sum
}

/// Z(w₁, w₂) = ∫₀^τ dt₁ ∫₀^{t₁} dt₂ g(t₁)g(t₂)e^{iw₁t₁}e^{iw₂t₂}.
pub fn eval_z(pulse: &Pulse, w1: f64, w2: f64) -> FunctionalValue {
    let g = pulse.g_series();
    FunctionalValue::closed(double(&g, w1, &g, w2), magnitude(pulse).powi(2))
}

/// Z as printed in pole-fraction form; valid away from its poles.
pub fn z_pole_fraction_form(pulse: &Pulse, w1: f64, w2: f64) -> C64 {
    let tau = pulse.tau();
    let e1 = C64::from_polar(1.0, w1 * tau) - 1.0;
    let e12 = C64::from_polar(1.0, (w1 + w2) * tau) - 1.0;
    let s = w1 + w2;
    let mut acc = C64::new(0.0, 0.0);
    for (_, wn, bn) in pulse.tones() {
        for (_, wm, bm) in pulse.tones() {
            let a = wn * wm / (w1 * w1 - wn * wn) * e1;
            let num = wn * wm * (wm * wm - wn * wn + w1 * w1 + 4.0 * w1 * w2 + 3.0 * w2 * w2);
            let den = ((wn + wm).powi(2) - s * s) * ((wn - wm).powi(2) - s * s);
            acc += bn * bm / (wm * wm - w2 * w2) * (a - num / den * e12);
        }
    }
    acc
}

/// S_p(w) = ∫₀^τ dt₁ ∫₀^{t₁} dt₂ g(t₁)g(t₂) sin[ω_p(t₁ − t₂)] e^{iwt₁}.
pub fn eval_sp(pulse: &Pulse, mode_freq: f64, w: f64) -> FunctionalValue {
    FunctionalValue::closed(sp_from_series(&pulse.g_series(), mode_freq, w), magnitude(pulse).powi(2))
}

/// S_p from a precomputed g series.
pub fn sp_from_series(g: &HarmonicSeries, mode_freq: f64, w: f64) -> C64 {
    (double(g, w + mode_freq, g, -mode_freq) - double(g, w - mode_freq, g, mode_freq)) / (2.0 * I)
}

/// S_p for 0-based mode `p` of a chain.
pub fn eval_sp_mode(chain: &ChainSpec, pulse: &Pulse, p: usize, w: f64) -> FunctionalValue {
    eval_sp(pulse, chain.mode_freqs()[p], w)
}

/// J_p = ∫₀^τ g(t)G²(t)e^{iω_p t}dt.
pub fn eval_jp(pulse: &Pulse, mode_freq: f64) -> FunctionalValue {
    let g = pulse.g_series();
    let big = pulse.big_g_series();
    let h = g.mul(&big).mul(&big);
    FunctionalValue::closed(single(&h, mode_freq), h.l1() * pulse.tau())
}

/// Both evaluations of Φ[η, g].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiValue {
    /// (χτ/4π) Σ B_n/n with χ from the pulse itself.
    pub closed_form: f64,
    /// The defining double integral, evaluated exactly.
    pub double_integral: f64,
}

/// Φ = Σ_p η_p^{j1}η_p^{j2} ∫∫_{t₂<t₁} g(t₁)g(t₂)G(t₂) sin[ω_p(t₁ − t₂)].
pub fn eval_phi(chain: &ChainSpec, pair: GatePair, pulse: &Pulse) -> PhiValue {
    let chi = chi_of(chain, pair, pulse);
    let closed_form = chi * pulse.tau() / (4.0 * PI) * pulse.phi_sum();
    let g = pulse.g_series();
    let gg = g.mul(&pulse.big_g_series());
    let double_integral = chain
        .pair_products(pair)
        .iter()
        .zip(chain.mode_freqs())
        .map(|(eta2, &wp)| eta2 * double(&g, wp, &gg, -wp).im)
        .sum();
    PhiValue { closed_form, double_integral }
}

/// χ through S_p(0): 2 Σ_p η_p^{j1}η_p^{j2} Re S_p(0).
pub fn chi_from_sp(chain: &ChainSpec, pair: GatePair, pulse: &Pulse) -> f64 {
    chain
        .pair_products(pair)
        .iter()
        .zip(chain.mode_freqs())
        .map(|(e, &wp)| 2.0 * e * eval_sp(pulse, wp, 0.0).value.re)
        .sum()
}

/// χ̃ = Σ_{j∈pair, p} (η_p^j)² Re S_p(0).
pub fn eval_chi_tilde(chain: &ChainSpec, pair: GatePair, pulse: &Pulse) -> f64 {
    let (a, b) = pair.indices();
    (0..chain.n_ions())
        .map(|p| {
            let w = chain.eta(p, a).powi(2) + chain.eta(p, b).powi(2);
            w * eval_sp(pulse, chain.mode_freqs()[p], 0.0).value.re
        })
        .sum()
}

/// g·G series, reused by the Magnus diagnostics.
pub fn g_big_g_series(pulse: &Pulse) -> HarmonicSeries {
    pulse.g_series().mul(&pulse.big_g_series())
}

/// Adaptive-quadrature evaluations of every functional, built only from
/// pointwise g(t) and G(t).
pub mod oracle {
    use super::*;
    use crate::quadrature::{integrate, integrate_ordered, Estimate};

    fn fastest(pulse: &Pulse) -> f64 {
        pulse.tones().map(|(_, w, _)| w).fold(0.0, f64::max)
    }

    /// Absolute tolerance for 1-D integrals linear in g.
    pub fn tol1(pulse: &Pulse) -> f64 {
        1e-13 * pulse.g_rms().max(1e-300) * pulse.tau()
    }

    /// Absolute tolerance for integrals quadratic in g.
    pub fn tol2(pulse: &Pulse) -> f64 {
        1e-13 * (pulse.g_rms() * pulse.tau()).powi(2).max(1e-300)
    }

    pub fn big_g(pulse: &Pulse, t: f64) -> Estimate {
        let s = t / pulse.tau();
        integrate(|x| C64::new(pulse.g(x * s), 0.0) * s, pulse.tau(), fastest(pulse) * s, tol1(pulse))
    }

    pub fn q(pulse: &Pulse, w: f64) -> Estimate {
        integrate(
            |t| pulse.g(t) * C64::from_polar(1.0, w * t),
            pulse.tau(),
            fastest(pulse) + w.abs(),
            tol1(pulse),
        )
    }

    pub fn f(pulse: &Pulse, w: f64) -> Estimate {
        let tol = tol2(pulse);
        integrate(
            |t| pulse.g(t) * pulse.big_g(t) * C64::from_polar(1.0, w * t),
            pulse.tau(),
            2.0 * fastest(pulse) + w.abs(),
            tol,
        )
    }

    pub fn jp(pulse: &Pulse, wp: f64) -> Estimate {
        let tol = 1e-13 * (pulse.g_rms() * pulse.tau()).powi(3).max(1e-300) / pulse.tau();
        integrate(
            |t| pulse.g(t) * pulse.big_g(t).powi(2) * C64::from_polar(1.0, wp * t),
            pulse.tau(),
            3.0 * fastest(pulse) + wp,
            tol,
        )
    }

    pub fn z(pulse: &Pulse, w1: f64, w2: f64) -> Estimate {
        integrate_ordered(
            1,
            |t, o: &mut [C64]| o[0] = pulse.g(t) * C64::from_polar(1.0, w1 * t),
            |t, o: &mut [C64]| o[0] = pulse.g(t) * C64::from_polar(1.0, w2 * t),
            pulse.tau(),
            fastest(pulse) + w1.abs().max(w2.abs()),
            tol2(pulse),
        )
    }

    pub fn sp(pulse: &Pulse, wp: f64, w: f64) -> Estimate {
        integrate_ordered(
            2,
            |t, o: &mut [C64]| {
                let e = pulse.g(t) * C64::from_polar(1.0, w * t);
                o[0] = e * (wp * t).sin();
                o[1] = -e * (wp * t).cos();
            },
            |t, o: &mut [C64]| {
                let g = pulse.g(t);
                o[0] = C64::new(g * (wp * t).cos(), 0.0);
                o[1] = C64::new(g * (wp * t).sin(), 0.0);
            },
            pulse.tau(),
            fastest(pulse) + wp + w.abs(),
            tol2(pulse),
        )
    }

    /// Σ_p weight_p ∫∫ g(t₁) g(t₂) h(t₂) sin[ω_p(t₁ − t₂)], h = 1 or G.
    fn weighted_sine_kernel(
        pulse: &Pulse,
        modes: &[(f64, f64)],
        with_big_g: bool,
        tol: f64,
    ) -> Estimate {
        let outer = |t: f64, o: &mut [C64]| {
            let g = pulse.g(t);
            for (k, &(wt, wp)) in modes.iter().enumerate() {
                let (s, c) = (wp * t).sin_cos();
                o[2 * k] = C64::new(wt * g * s, 0.0);
                o[2 * k + 1] = C64::new(-wt * g * c, 0.0);
            }
        };
        let inner = |t: f64, o: &mut [C64]| {
            let h = if with_big_g { pulse.g(t) * pulse.big_g(t) } else { pulse.g(t) };
            for (k, &(_, wp)) in modes.iter().enumerate() {
                let (s, c) = (wp * t).sin_cos();
                o[2 * k] = C64::new(h * c, 0.0);
                o[2 * k + 1] = C64::new(h * s, 0.0);
            }
        };
        let wmax = modes.iter().map(|m| m.1).fold(0.0, f64::max);
        let k = if with_big_g { 2.0 } else { 1.0 };
        integrate_ordered(2 * modes.len(), outer, inner, pulse.tau(), k * fastest(pulse) + wmax, tol)
    }

    pub fn chi(chain: &ChainSpec, pair: GatePair, pulse: &Pulse) -> Estimate {
        let modes: Vec<(f64, f64)> = chain
            .pair_products(pair)
            .iter()
            .zip(chain.mode_freqs())
            .map(|(e, &w)| (2.0 * e, w))
            .collect();
        let wsum: f64 = modes.iter().map(|m| m.0.abs()).sum();
        weighted_sine_kernel(pulse, &modes, false, tol2(pulse) * wsum)
    }

    pub fn chi_tilde(chain: &ChainSpec, pair: GatePair, pulse: &Pulse) -> Estimate {
        let (a, b) = pair.indices();
        let modes: Vec<(f64, f64)> = (0..chain.n_ions())
            .map(|p| (chain.eta(p, a).powi(2) + chain.eta(p, b).powi(2), chain.mode_freqs()[p]))
            .collect();
        let wsum: f64 = modes.iter().map(|m| m.0.abs()).sum();
        weighted_sine_kernel(pulse, &modes, false, tol2(pulse) * wsum)
    }

    pub fn phi(chain: &ChainSpec, pair: GatePair, pulse: &Pulse) -> Estimate {
        let modes: Vec<(f64, f64)> = chain
            .pair_products(pair)
            .iter()
            .zip(chain.mode_freqs())
            .map(|(e, &w)| (*e, w))
            .collect();
        let wsum: f64 = modes.iter().map(|m| m.0.abs()).sum();
        let tol = tol2(pulse) * wsum * pulse.g_rms() * pulse.tau();
        weighted_sine_kernel(pulse, &modes, true, tol)
    }

    /// ∫₀^τ dt ∫₀^t g(t′)dt′.
    pub fn mean_big_g_integral(pulse: &Pulse) -> Estimate {
        integrate_ordered(
            1,
            |_, o: &mut [C64]| o[0] = C64::new(1.0, 0.0),
            |t, o: &mut [C64]| o[0] = C64::new(pulse.g(t), 0.0),
            pulse.tau(),
            fastest(pulse),
            tol1(pulse) * pulse.tau(),
        )
    }
}
