//! Composite Gauss–Legendre quadrature on [0, τ], used as an independent
//! check on the closed-form functionals.
//!
//! Panels double until two successive estimates agree to the requested
//! absolute tolerance. Two-dimensional time-ordered integrals are written as
//! sums of separable products and evaluated with a cumulative inner rule.

use std::sync::OnceLock;

use num_complex::Complex64 as C64;

/// Nodes per panel.
pub const ORDER: usize = 20;
const MAX_PANELS: usize = 1 << 18;

/// Gauss–Legendre nodes and weights on [−1, 1] (Newton on P_n).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
                p1 = z;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

fn rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(ORDER))
}

/// Result of an adaptive quadrature: value and |I_P − I_2P|.
#[derive(Debug, Clone, Copy)]
pub struct Estimate {
    pub value: C64,
    pub error: f64,
}

/// Gauss rule on [a, b].
pub fn gauss<F: Fn(f64) -> C64>(f: &F, a: f64, b: f64) -> C64 {
    let (x, w) = rule();
    let h = 0.5 * (b - a);
    let c = 0.5 * (b + a);
    x.iter().zip(w).map(|(xi, wi)| f(c + h * xi) * *wi).sum::<C64>() * h
}

fn composite<F: Fn(f64) -> C64>(f: &F, tau: f64, panels: usize) -> C64 {
    let h = tau / panels as f64;
    (0..panels).map(|k| gauss(f, k as f64 * h, (k + 1) as f64 * h)).sum()
}

/// Initial panel count so that each panel spans at most ~4 rad of the
/// fastest oscillation `max_freq`.
pub fn initial_panels(max_freq: f64, tau: f64) -> usize {
    ((max_freq.abs() * tau / 4.0).ceil() as usize).clamp(2, MAX_PANELS)
}

/// ∫₀^τ f(t) dt to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> C64>(f: F, tau: f64, max_freq: f64, tol: f64) -> Estimate {
    let mut panels = initial_panels(max_freq, tau);
    let mut prev = composite(&f, tau, panels);
    loop {
        panels *= 2;
        let next = composite(&f, tau, panels);
        let error = (next - prev).norm();
        if error <= tol || panels >= MAX_PANELS {
            return Estimate { value: next, error };
        }
        prev = next;
    }
}

/// Vector-valued Gauss rule on [a, b], accumulated into `acc`.
fn gauss_vec<F: Fn(f64, &mut [C64])>(f: &F, a: f64, b: f64, buf: &mut [C64], acc: &mut [C64]) {
    let (x, w) = rule();
    let h = 0.5 * (b - a);
    let c = 0.5 * (b + a);
    for (xi, wi) in x.iter().zip(w) {
        f(c + h * xi, buf);
        for (s, v) in acc.iter_mut().zip(buf.iter()) {
            *s += *v * (wi * h);
        }
    }
}

/// Σ_r ∫₀^τ dt₁ outer_r(t₁) ∫₀^{t₁} dt₂ inner_r(t₂) on a fixed panel grid.
fn nested_fixed<F, G>(n: usize, outer: &F, inner: &G, tau: f64, panels: usize) -> C64
where
    F: Fn(f64, &mut [C64]),
    G: Fn(f64, &mut [C64]),
{
    let (x, w) = rule();
    let h = tau / panels as f64;
    let zero = C64::new(0.0, 0.0);
    let mut total = zero;
    let mut cum = vec![zero; n];
    let mut partial = vec![zero; n];
    let mut buf = vec![zero; n];
    let mut out = vec![zero; n];
    for k in 0..panels {
        let a = k as f64 * h;
        let b = a + h;
        let mut panel_sum = zero;
        for (xi, wi) in x.iter().zip(w) {
            let t1 = 0.5 * (a + b) + 0.5 * h * xi;
            partial.copy_from_slice(&cum);
            gauss_vec(inner, a, t1, &mut buf, &mut partial);
            outer(t1, &mut out);
            let dot: C64 = out.iter().zip(&partial).map(|(o, i)| o * i).sum();
            panel_sum += dot * *wi;
        }
        total += panel_sum * (0.5 * h);
        gauss_vec(inner, a, b, &mut buf, &mut cum);
    }
    total
}

/// Nested adaptive quadrature of a time-ordered double integral written as
/// a sum of `n` separable products outer_r(t₁)·inner_r(t₂), t₂ < t₁. Each
/// closure fills all `n` components at one time point.
pub fn integrate_ordered<F, G>(n: usize, outer: F, inner: G, tau: f64, max_freq: f64, tol: f64) -> Estimate
where
    F: Fn(f64, &mut [C64]),
    G: Fn(f64, &mut [C64]),
{
    let mut panels = initial_panels(max_freq, tau);
    let mut prev = nested_fixed(n, &outer, &inner, tau, panels);
    loop {
        panels *= 2;
        let next = nested_fixed(n, &outer, &inner, tau, panels);
        let error = (next - prev).norm();
        if error <= tol || panels >= MAX_PANELS {
            return Estimate { value: next, error };
        }
        prev = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_and_weights() {
        let (x, w) = gauss_legendre(ORDER);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        // exact for x^{2n-2}
        let m = 2 * ORDER - 2;
        let s: f64 = x.iter().zip(&w).map(|(a, b)| a.powi(m as i32) * b).sum();
        assert!((s - 2.0 / (m as f64 + 1.0)).abs() < 1e-14);
        let (x3, w3) = gauss_legendre(3);
        assert!((x3[2] - (0.6f64).sqrt()).abs() < 1e-15);
        assert!((w3[1] - 8.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn oscillatory_integral() {
        let (tau, w) = (2.0, 137.3);
        let est = integrate(|t| C64::from_polar(1.0, w * t), tau, w, 1e-14);
        let exact = (C64::from_polar(1.0, w * tau) - 1.0) / C64::new(0.0, w);
        assert!((est.value - exact).norm() < 1e-13);
    }

    #[test]
    fn ordered_integral_of_polynomials() {
        // ∫₀^1 t₁ ∫₀^{t₁} t₂² = 1/15
        let est = integrate_ordered(
            1,
            |t, o: &mut [C64]| o[0] = C64::new(t, 0.0),
            |t, o: &mut [C64]| o[0] = C64::new(t * t, 0.0),
            1.0,
            1.0,
            1e-15,
        );
        assert!((est.value.re - 1.0 / 15.0).abs() < 1e-15);
    }
}
