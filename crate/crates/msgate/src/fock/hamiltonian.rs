//! Action of H(t) = g(t) U(t) H₀ U(t)† on a joint state.
//!
//! For the full Mølmer–Sørensen form, cos V σ_y + sin V σ_x couples the
//! computational blocks as ψ₀ ← −i e^{iV} ψ₁ and ψ₁ ← i e^{−iV} ψ₀, and
//! e^{±iV} factorizes into one small matrix per mode. The truncated
//! polynomial forms use repeated applications of V instead.
//!
//! In both cases the ψ₀ → ψ₁ operator is the elementwise conjugate of the
//! ψ₁ → ψ₀ operator F, so each ion needs a single application of F to four
//! lanes (two of them conjugated) per phonon index. Lanes are stored split
//! into real and imaginary parts, eight doubles per phonon index.

use super::elements::single_mode_displacement;
use super::{HamiltonianKind, HamiltonianSpec, PhononScheme};
use crate::error::{Error, Result};
use crate::pulse::Pulse;
use crate::C64;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const I: C64 = C64 { re: 0.0, im: 1.0 };
const LANES: usize = 4;
const W: usize = 2 * LANES;

/// Lane sources (computational label, conjugated) for each ion; lane l
/// always feeds computational label l.
const LANE_SOURCES: [[(usize, bool); LANES]; 2] = [
    [(2, false), (3, false), (0, true), (1, true)],
    [(1, false), (0, true), (3, false), (2, true)],
];

/// y += c·x over split-lane records.
#[inline(always)]
fn axpy(c: C64, x: &[f64], y: &mut [f64]) {
    for (yr, xr) in y.chunks_exact_mut(W).zip(x.chunks_exact(W)) {
        let xr: &[f64; W] = xr.try_into().unwrap();
        let yr: &mut [f64; W] = yr.try_into().unwrap();
        let mut t = [0.0; W];
        for l in 0..LANES {
            t[l] = c.re * xr[l] - c.im * xr[l + LANES];
            t[l + LANES] = c.re * xr[l + LANES] + c.im * xr[l];
        }
        for l in 0..W {
            yr[l] += t[l];
        }
    }
}

#[inline(always)]
fn axpy_real(c: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += c * xi;
    }
}

/// c·(M₁ ⊗ … ⊗ M_N) with trivial (1×1) factors folded into c.
#[derive(Debug, Clone)]
struct Kron {
    dims: Vec<usize>,
    strides: Vec<usize>,
    factors: Vec<Option<Vec<C64>>>,
    scalar: C64,
}

impl Kron {
    /// y += (⊗M)x on split-lane records; `a` and `b` are scratch.
    #[inline(always)]
    fn apply_acc(&self, x: &[f64], y: &mut [f64], a: &mut Vec<f64>, b: &mut Vec<f64>) {
        a.clear();
        a.extend_from_slice(x);
        b.resize(x.len(), 0.0);
        for (p, f) in self.factors.iter().enumerate() {
            let Some(m) = f else { continue };
            let d = self.dims[p];
            let inner = self.strides[p] * W;
            let span = d * inner;
            for (src, dst) in a.chunks_exact(span).zip(b.chunks_exact_mut(span)) {
                for n in 0..d {
                    let out = &mut dst[n * inner..(n + 1) * inner];
                    out.fill(0.0);
                    for (k, &c) in m[n * d..(n + 1) * d].iter().enumerate() {
                        if c != ZERO {
                            axpy(c, &src[k * inner..(k + 1) * inner], out);
                        }
                    }
                }
            }
            std::mem::swap(a, b);
        }
        axpy(self.scalar, a, y);
    }
}

#[derive(Debug, Clone)]
enum IonTerm {
    /// −i e^{iV}.
    Displacement(Kron),
    /// Σ_k c_k V^k.
    Polynomial { eta: Vec<f64>, coeffs: Vec<C64> },
}

/// Scratch buffers for [`Hamiltonian::apply_with`].
#[derive(Debug, Default)]
pub struct Workspace {
    phases: Vec<C64>,
    z: Vec<f64>,
    y: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
}

/// Prepared Hamiltonian for one HamiltonianSpec and phonon scheme.
#[derive(Debug, Clone)]
pub struct Hamiltonian {
    scheme: PhononScheme,
    dims: Vec<usize>,
    strides: Vec<usize>,
    freqs: Vec<f64>,
    pulse: Pulse,
    ions: [IonTerm; 2],
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|x| x as f64).product()
}

impl Hamiltonian {
    pub fn new(spec: &HamiltonianSpec, scheme: &PhononScheme) -> Result<Self> {
        let n = spec.chain.n_ions();
        if scheme.n_modes() != n {
            return Err(Error::Dimension(format!("scheme has {} modes, chain {n}", scheme.n_modes())));
        }
        let dims = scheme.dims();
        let strides = scheme.strides();
        let (j1, j2) = spec.pair.indices();
        let make = |j: usize| -> IonTerm {
            let eta = spec.chain.ion_column(j);
            match spec.kind {
                HamiltonianKind::FullMs => {
                    let mut k = Kron { dims: dims.clone(), strides: strides.clone(), factors: vec![], scalar: -I };
                    for (p, &e) in eta.iter().enumerate() {
                        let d = dims[p];
                        let m = single_mode_displacement(e, d);
                        if d == 1 {
                            k.scalar *= m[(0, 0)];
                            k.factors.push(None);
                        } else {
                            k.factors.push(Some((0..d * d).map(|i| m[(i / d, i % d)]).collect()));
                        }
                    }
                    IonTerm::Displacement(k)
                }
                HamiltonianKind::Expanded { nc, ns } => {
                    let kmax = nc.max(ns).max(0) as usize;
                    let coeffs = (0..=kmax)
                        .map(|k| {
                            let c = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 } / factorial(k);
                            if k % 2 == 0 && (k as i32) <= nc {
                                // cos V σ_y: ψ₀ ← −i P_c ψ₁
                                -I * c
                            } else if k % 2 == 1 && (k as i32) <= ns {
                                C64::new(c, 0.0)
                            } else {
                                ZERO
                            }
                        })
                        .collect();
                    IonTerm::Polynomial { eta, coeffs }
                }
            }
        };
        let ions = [make(j1), make(j2)];
        Ok(Hamiltonian {
            scheme: scheme.clone(),
            dims,
            strides,
            freqs: spec.chain.mode_freqs().to_vec(),
            pulse: spec.pulse.clone(),
            ions,
        })
    }

    pub fn scheme(&self) -> &PhononScheme {
        &self.scheme
    }

    pub fn pulse(&self) -> &Pulse {
        &self.pulse
    }

    /// Joint dimension 4·D.
    pub fn dim(&self) -> usize {
        4 * self.scheme.dim()
    }

    /// Largest carrier frequency in H(t): the pulse tones and the mode
    /// frequencies. Multi-phonon phases e^{iω_p Δn t} are faster but carry
    /// η^{Δn}-suppressed amplitudes; step adequacy is checked by halving.
    pub fn max_frequency(&self) -> f64 {
        let tone = self.pulse.basis_freqs().into_iter().fold(0.0, f64::max);
        self.freqs.iter().copied().fold(tone, f64::max)
    }

    /// out = H(t)ψ.
    pub fn apply(&self, t: f64, psi: &[C64], out: &mut [C64]) {
        self.apply_with(t, psi, out, &mut Workspace::default());
    }

    /// out = H(t)ψ using caller-owned scratch.
    pub fn apply_with(&self, t: f64, psi: &[C64], out: &mut [C64], ws: &mut Workspace) {
        self.apply_generic(t, psi, out, ws);
    }

    #[inline(always)]
    fn apply_generic(&self, t: f64, psi: &[C64], out: &mut [C64], ws: &mut Workspace) {
        let d = self.scheme.dim();
        assert_eq!(psi.len(), 4 * d);
        assert_eq!(out.len(), 4 * d);
        let g = self.pulse.g(t);
        out.fill(ZERO);
        if g == 0.0 {
            return;
        }
        self.fill_phases(t, &mut ws.phases);
        for (ion, term) in self.ions.iter().enumerate() {
            let sources = LANE_SOURCES[ion];
            ws.z.resize(W * d, 0.0);
            for (idx, rec) in ws.z.chunks_exact_mut(W).enumerate() {
                let ph = ws.phases[idx];
                for (l, &(c, conj)) in sources.iter().enumerate() {
                    let x = psi[c * d + idx];
                    let v = if conj { ph * x.conj() } else { ph.conj() * x };
                    rec[l] = v.re;
                    rec[l + LANES] = v.im;
                }
            }
            ws.y.clear();
            ws.y.resize(W * d, 0.0);
            match term {
                IonTerm::Displacement(k) => k.apply_acc(&ws.z, &mut ws.y, &mut ws.a, &mut ws.b),
                IonTerm::Polynomial { eta, coeffs } => {
                    let (cur, next) = (&mut ws.a, &mut ws.b);
                    cur.clear();
                    cur.extend_from_slice(&ws.z);
                    for (k, &c) in coeffs.iter().enumerate() {
                        if k > 0 {
                            next.clear();
                            next.resize(cur.len(), 0.0);
                            self.apply_v(eta, cur, next);
                            std::mem::swap(cur, next);
                        }
                        if c != ZERO {
                            axpy(c, cur, &mut ws.y);
                        }
                    }
                }
            }
            for (idx, rec) in ws.y.chunks_exact(W).enumerate() {
                let gp = g * ws.phases[idx];
                for (l, &(_, conj)) in sources.iter().enumerate() {
                    let v = C64::new(rec[l], rec[l + LANES]);
                    out[l * d + idx] += gp * if conj { v.conj() } else { v };
                }
            }
        }
    }

    /// e^{iΣ_p ω_p n_p t} over the phonon index.
    fn fill_phases(&self, t: f64, out: &mut Vec<C64>) {
        out.clear();
        out.push(C64::new(1.0, 0.0));
        for (w, &dp) in self.freqs.iter().zip(&self.dims) {
            let step = C64::from_polar(1.0, w * t);
            let len = out.len();
            out.resize(len * dp, ZERO);
            for i in (0..len).rev() {
                let mut z = out[i];
                for n in 0..dp {
                    out[i * dp + n] = z;
                    z *= step;
                }
            }
        }
    }

    /// y += Σ_p η_p (a_p + a_p†) x on split-lane records.
    #[inline(always)]
    fn apply_v(&self, eta: &[f64], x: &[f64], y: &mut [f64]) {
        for (p, &e) in eta.iter().enumerate() {
            let d = self.dims[p];
            if d == 1 || e == 0.0 {
                continue;
            }
            let s = self.strides[p] * W;
            let span = d * s;
            for (xs, ys) in x.chunks_exact(span).zip(y.chunks_exact_mut(span)) {
                for n in 0..d - 1 {
                    let c = e * ((n + 1) as f64).sqrt();
                    let (lo, hi) = (n * s, (n + 1) * s);
                    axpy_real(c, &xs[lo..hi], &mut ys[hi..hi + s]);
                    axpy_real(c, &xs[hi..hi + s], &mut ys[lo..hi]);
                }
            }
        }
    }
}
