//! Exact time-ordered integrals of harmonic exponential sums.
//!
//! Pulse-derived signals (g, G, gG, ...) are trigonometric polynomials in the
//! base frequency Ω₀ = 2π/τ. Their nested integrals against extra phases
//! e^{iwt} reduce to integrals of exponentials over simplices, which equal
//! divided differences of exp at the partial-sum frequencies. Those are
//! evaluated with a Taylor fallback for clustered nodes, so coincident
//! frequencies (poles of the textbook formulas) need no special casing.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Below this node span the divided difference is summed as a Taylor series.
const CLUSTER_SPAN: f64 = 1.0;
/// Inner frequencies with |ντ| below this are integrated through the
/// divided-difference path instead of the separable formula.
const SEPARABLE_MIN: f64 = 0.5;

/// Divided difference exp[x₀, …, xₙ] for up to a handful of nodes.
pub fn dd_exp(nodes: &[C64]) -> C64 {
    let mut x: Vec<C64> = nodes.to_vec();
    x.sort_by(|a, b| a.im.total_cmp(&b.im).then(a.re.total_cmp(&b.re)));
    dd_sorted(&x)
}

fn dd_sorted(x: &[C64]) -> C64 {
    let n = x.len() - 1;
    if n == 0 {
        return x[0].exp();
    }
    let span = (x[n] - x[0]).norm();
    if span < CLUSTER_SPAN {
        return dd_taylor(x);
    }
    (dd_sorted(&x[1..]) - dd_sorted(&x[..n])) / (x[n] - x[0])
}

/// e^c Σ_m h_m(y)/(m+n)! with y = x − c, c the node mean.
fn dd_taylor(x: &[C64]) -> C64 {
    let n = x.len() - 1;
    let c = x.iter().sum::<C64>() / x.len() as f64;
    let y: Vec<C64> = x.iter().map(|v| v - c).collect();
    // h[j] holds h_m(y_0..y_j) for the current degree m.
    let mut h = vec![C64::new(1.0, 0.0); x.len()];
    let mut fact: f64 = (1..=n).map(|k| k as f64).product();
    let mut sum = C64::new(1.0 / fact, 0.0);
    let ymax = y.iter().fold(0.0f64, |a, v| a.max(v.norm()));
    // |h_m| <= C(m+n, n) ymax^m
    let mut bound = 1.0;
    for m in 1..80 {
        // h_m(y0..yj) = h_m(y0..y_{j-1}) + y_j h_{m-1}(y0..yj)
        h[0] *= y[0];
        for j in 1..=n {
            h[j] = h[j - 1] + y[j] * h[j];
        }
        fact *= (m + n) as f64;
        sum += h[n] / fact;
        bound *= ymax * (m + n) as f64 / m as f64;
        if bound / fact <= 1e-18 * sum.norm() {
            break;
        }
    }
    c.exp() * sum
}

/// sin(x)/x.
fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// ∫₀^τ e^{ict} dt.
pub fn exp_integral(c: f64, tau: f64) -> C64 {
    let th = 0.5 * c * tau;
    C64::from_polar(tau * sinc(th), th)
}

/// ∫₀^τ dt₁ e^{iat₁} ∫₀^{t₁} dt₂ e^{ibt₂}.
pub fn triangle(a: f64, b: f64, tau: f64) -> C64 {
    tau * tau * dd_exp(&[C64::new(0.0, 0.0), I * (a * tau), I * ((a + b) * tau)])
}

/// ∫₀^τ dt₁ e^{iat₁} ∫₀^{t₁} dt₂ e^{ibt₂} ∫₀^{t₂} dt₃ e^{ict₃}.
pub fn tetra(a: f64, b: f64, c: f64, tau: f64) -> C64 {
    tau.powi(3)
        * dd_exp(&[
            C64::new(0.0, 0.0),
            I * (a * tau),
            I * ((a + b) * tau),
            I * ((a + b + c) * tau),
        ])
}

/// Trigonometric polynomial Σ_k c_k e^{ikΩ₀t}, Ω₀ = 2π/τ, k from `offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicSeries {
    tau: f64,
    offset: i64,
    coeffs: Vec<C64>,
}

impl HarmonicSeries {
    pub fn zero(tau: f64) -> Self {
        HarmonicSeries { tau, offset: 0, coeffs: Vec::new() }
    }

    pub fn constant(tau: f64, c: C64) -> Self {
        HarmonicSeries { tau, offset: 0, coeffs: vec![c] }
    }

    pub fn from_terms(tau: f64, terms: impl IntoIterator<Item = (i64, C64)>) -> Self {
        let terms: Vec<(i64, C64)> = terms.into_iter().collect();
        if terms.is_empty() {
            return Self::zero(tau);
        }
        let lo = terms.iter().map(|t| t.0).min().unwrap();
        let hi = terms.iter().map(|t| t.0).max().unwrap();
        let mut coeffs = vec![C64::new(0.0, 0.0); (hi - lo + 1) as usize];
        for (k, c) in terms {
            coeffs[(k - lo) as usize] += c;
        }
        HarmonicSeries { tau, offset: lo, coeffs }
    }

    /// sin(nΩ₀t) scaled by `amp`.
    pub fn sine(tau: f64, n: i64, amp: f64) -> Self {
        let c = C64::new(0.0, -0.5 * amp);
        Self::from_terms(tau, [(n, c), (-n, -c)])
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn base(&self) -> f64 {
        2.0 * PI / self.tau
    }

    pub fn terms(&self) -> impl Iterator<Item = (i64, C64)> + '_ {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| c.re != 0.0 || c.im != 0.0)
            .map(move |(i, c)| (self.offset + i as i64, *c))
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.iter().all(|c| c.re == 0.0 && c.im == 0.0)
    }

    pub fn eval(&self, t: f64) -> C64 {
        let w = self.base();
        self.terms().map(|(k, c)| c * C64::from_polar(1.0, k as f64 * w * t)).sum()
    }

    pub fn scale(&self, s: C64) -> Self {
        HarmonicSeries {
            tau: self.tau,
            offset: self.offset,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::from_terms(self.tau, self.terms().chain(other.terms()))
    }

    /// Pointwise product (convolution of coefficients).
    pub fn mul(&self, other: &Self) -> Self {
        if self.coeffs.is_empty() || other.coeffs.is_empty() {
            return Self::zero(self.tau);
        }
        let mut coeffs = vec![C64::new(0.0, 0.0); self.coeffs.len() + other.coeffs.len() - 1];
        let nonzero = |v: &[C64]| -> Vec<(usize, C64)> {
            v.iter().copied().enumerate().filter(|(_, c)| c.re != 0.0 || c.im != 0.0).collect()
        };
        let rhs = nonzero(&other.coeffs);
        for (i, a) in nonzero(&self.coeffs) {
            for &(j, b) in &rhs {
                coeffs[i + j] += a * b;
            }
        }
        HarmonicSeries { tau: self.tau, offset: self.offset + other.offset, coeffs }
    }

    /// Σ|c_k|, a bound on max_t |h(t)|.
    pub fn l1(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).sum()
    }
}

/// ∫₀^τ h(t) e^{iwt} dt.
pub fn single(h: &HarmonicSeries, w: f64) -> C64 {
    let base = h.base();
    h.terms().map(|(k, c)| c * exp_integral(k as f64 * base + w, h.tau)).sum()
}

/// Splits h·e^{iwt} into the separable part c_k/(iν_k) (|ν_kτ| large enough)
/// and the remaining near-zero-frequency terms.
fn split_inner(h: &HarmonicSeries, w: f64) -> (HarmonicSeries, C64, Vec<(f64, C64)>) {
    let base = h.base();
    let mut sep = Vec::new();
    let mut total = C64::new(0.0, 0.0);
    let mut rest = Vec::new();
    for (k, c) in h.terms() {
        let nu = k as f64 * base + w;
        if (nu * h.tau).abs() >= SEPARABLE_MIN {
            let d = c / (I * nu);
            sep.push((k, d));
            total += d;
        } else {
            rest.push((nu, c));
        }
    }
    (HarmonicSeries::from_terms(h.tau, sep), total, rest)
}

/// ∫₀^τ dt₁ h₁(t₁)e^{iw₁t₁} ∫₀^{t₁} dt₂ h₂(t₂)e^{iw₂t₂}.
pub fn double(h1: &HarmonicSeries, w1: f64, h2: &HarmonicSeries, w2: f64) -> C64 {
    let (sep, total, rest) = split_inner(h2, w2);
    let mut v = single(&h1.mul(&sep), w1 + w2) - total * single(h1, w1);
    let base = h1.base();
    for (nu2, c2) in rest {
        v += c2
            * h1.terms()
                .map(|(k1, c1)| c1 * triangle(k1 as f64 * base + w1, nu2, h1.tau))
                .sum::<C64>();
    }
    v
}

/// Triple time-ordered integral t₃ < t₂ < t₁ of hᵢ(tᵢ)e^{iwᵢtᵢ}.
pub fn triple(
    h1: &HarmonicSeries,
    w1: f64,
    h2: &HarmonicSeries,
    w2: f64,
    h3: &HarmonicSeries,
    w3: f64,
) -> C64 {
    let (sep, total, rest) = split_inner(h3, w3);
    let mut v = double(h1, w1, &h2.mul(&sep), w2 + w3) - total * double(h1, w1, h2, w2);
    let base = h1.base();
    for (nu3, c3) in rest {
        for (k2, c2) in h2.terms() {
            let nu2 = k2 as f64 * base + w2;
            v += c3
                * c2
                * h1.terms()
                    .map(|(k1, c1)| c1 * tetra(k1 as f64 * base + w1, nu2, nu3, h1.tau))
                    .sum::<C64>();
        }
    }
    v
}
