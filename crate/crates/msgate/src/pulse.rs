//! Sine-basis control pulses g(t) = Σ_n B_n sin(ω_n t), ω_n = 2πn/τ.
//!
//! Pulses are built by restricting B to the null space of the linear
//! closure constraints (and optionally the Φ row Σ B_n/n = 0), then taking
//! the dominant eigenvector of the χ quadratic form projected onto that
//! space.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::chain::{ChainSpec, GatePair};
use crate::error::{Error, Result};
use crate::integrals::{triangle, HarmonicSeries};
use crate::C64;

/// Relative gap below which a basis tone counts as colliding with a mode.
pub const COLLISION_TOL: f64 = 1e-6;
/// Relative distance of ω_pτ/2π from an integer treated as exact resonance.
const RESONANCE_TOL: f64 = 1e-9;

/// Gate time and tone index range of a sine basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseBasis {
    pub tau: f64,
    pub n_min: u32,
    pub n_max: u32,
}

impl PulseBasis {
    pub fn new(tau: f64, n_min: u32, n_max: u32) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidArgument(format!("gate time {tau} must be positive")));
        }
        if n_min < 1 || n_max < n_min {
            return Err(Error::InvalidArgument(format!(
                "basis range {n_min}..{n_max} needs 1 <= n_min <= n_max"
            )));
        }
        Ok(PulseBasis { tau, n_min, n_max })
    }

    /// Tones bracketing the mode band: floor(ω₁τ/2π) − 2 … ceil(ω_Nτ/2π) + 2.
    pub fn default_for(chain: &ChainSpec, tau: f64) -> Result<Self> {
        let w = chain.mode_freqs();
        let lo = (w[0] * tau / (2.0 * PI)).floor() as i64 - 2;
        let hi = (w[w.len() - 1] * tau / (2.0 * PI)).ceil() as i64 + 2;
        Self::new(tau, lo.max(1) as u32, hi.max(1) as u32)
    }

    pub fn size(&self) -> usize {
        (self.n_max - self.n_min + 1) as usize
    }

    pub fn indices(&self) -> impl Iterator<Item = u32> {
        self.n_min..=self.n_max
    }

    pub fn omega(&self, n: u32) -> f64 {
        2.0 * PI * n as f64 / self.tau
    }

    pub fn freqs(&self) -> Vec<f64> {
        self.indices().map(|n| self.omega(n)).collect()
    }
}

/// Where a pulse came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    #[serde(default)]
    pub chain_sha256: Option<String>,
    #[serde(default)]
    pub pair: Option<[usize; 2]>,
    #[serde(default)]
    pub enforce_phi: bool,
    #[serde(default)]
    pub chi_target: Option<f64>,
    /// Product of all amplitude factors applied after synthesis.
    #[serde(default = "one")]
    pub calibration_factor: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for Provenance {
    fn default() -> Self {
        Provenance {
            chain_sha256: None,
            pair: None,
            enforce_phi: false,
            chi_target: None,
            calibration_factor: 1.0,
        }
    }
}

/// Sine-basis pulse. Coefficients are Rabi rates in rad/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    pub tau_s: f64,
    pub n_min: u32,
    pub n_max: u32,
    pub coeffs: Vec<f64>,
    /// Sign of the realized χ (the quadratic form's sign is fixed by the basis).
    pub chi_sign: i8,
    #[serde(default)]
    pub provenance: Provenance,
}

impl Pulse {
    pub fn new(basis: PulseBasis, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != basis.size() {
            return Err(Error::Dimension(format!(
                "{} coefficients for a basis of {} tones",
                coeffs.len(),
                basis.size()
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("non-finite pulse coefficient".into()));
        }
        Ok(Pulse {
            tau_s: basis.tau,
            n_min: basis.n_min,
            n_max: basis.n_max,
            coeffs,
            chi_sign: 1,
            provenance: Provenance::default(),
        })
    }

    pub fn zero(basis: PulseBasis) -> Self {
        Self::new(basis, vec![0.0; basis.size()]).expect("zero pulse is valid")
    }

    pub fn basis(&self) -> PulseBasis {
        PulseBasis { tau: self.tau_s, n_min: self.n_min, n_max: self.n_max }
    }

    pub fn tau(&self) -> f64 {
        self.tau_s
    }

    pub fn basis_freqs(&self) -> Vec<f64> {
        self.basis().freqs()
    }

    /// (ω_n, B_n) pairs.
    pub fn tones(&self) -> impl Iterator<Item = (u32, f64, f64)> + '_ {
        let b = self.basis();
        b.indices().zip(&self.coeffs).map(move |(n, &c)| (n, b.omega(n), c))
    }

    /// g(t), no range check.
    pub fn g(&self, t: f64) -> f64 {
        self.tones().map(|(_, w, b)| b * (w * t).sin()).sum()
    }

    /// G(t) = ∫₀^t g, closed form 2Σ(B_n/ω_n) sin²(ω_n t/2).
    pub fn big_g(&self, t: f64) -> f64 {
        self.tones()
            .map(|(_, w, b)| 2.0 * b / w * (0.5 * w * t).sin().powi(2))
            .sum()
    }

    /// g as a harmonic series in Ω₀ = 2π/τ.
    pub fn g_series(&self) -> HarmonicSeries {
        let tau = self.tau_s;
        self.tones()
            .map(|(n, _, b)| HarmonicSeries::sine(tau, n as i64, b))
            .fold(HarmonicSeries::zero(tau), |acc, s| acc.add(&s))
    }

    /// G as a harmonic series.
    pub fn big_g_series(&self) -> HarmonicSeries {
        let tau = self.tau_s;
        let mut terms = Vec::new();
        let mut c0 = 0.0;
        for (n, w, b) in self.tones() {
            let a = b / w;
            c0 += a;
            terms.push((n as i64, C64::new(-0.5 * a, 0.0)));
            terms.push((-(n as i64), C64::new(-0.5 * a, 0.0)));
        }
        terms.push((0, C64::new(c0, 0.0)));
        HarmonicSeries::from_terms(tau, terms)
    }

    /// ‖B‖₂.
    pub fn coeff_norm(&self) -> f64 {
        self.coeffs.iter().map(|b| b * b).sum::<f64>().sqrt()
    }

    /// RMS of g over [0, τ], equal to ‖B‖/√2.
    pub fn g_rms(&self) -> f64 {
        self.coeff_norm() / 2f64.sqrt()
    }

    /// Σ_n B_n/n.
    pub fn phi_sum(&self) -> f64 {
        self.indices_coeffs().map(|(n, b)| b / n as f64).sum()
    }

    fn indices_coeffs(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        (self.n_min..=self.n_max).zip(self.coeffs.iter().copied())
    }

    /// Σ_n B_n(1 − cos 2πn)/ω_n, identically zero for integer tones.
    pub fn mean_value_identity(&self) -> f64 {
        self.tones().map(|(n, w, b)| b * (1.0 - (2.0 * PI * n as f64).cos()) / w).sum()
    }

    /// Multiplies every coefficient by `c`.
    pub fn scale(&self, c: f64) -> Result<Pulse> {
        if !(c.is_finite() && c != 0.0) {
            return Err(Error::InvalidArgument(format!("scale factor {c} must be finite and nonzero")));
        }
        let mut p = self.clone();
        p.coeffs.iter_mut().for_each(|b| *b *= c);
        p.provenance.calibration_factor *= c;
        Ok(p)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("pulse serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: Pulse = serde_json::from_str(text).map_err(|e| Error::Malformed(e.to_string()))?;
        Pulse::new(p.basis(), p.coeffs.clone())?;
        if p.chi_sign != 1 && p.chi_sign != -1 {
            return Err(Error::Malformed("chi_sign must be 1 or -1".into()));
        }
        Ok(p)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn content_hash(&self) -> String {
        let compact = serde_json::to_string(self).expect("pulse serializes");
        hex::encode(Sha256::digest(compact.as_bytes()))
    }
}

/// Closure matrix with entries ω_n/(ω_n² − ω_p²), one row per mode.
pub fn closure_matrix(chain: &ChainSpec, basis: PulseBasis) -> Result<DMatrix<f64>> {
    let w = basis.freqs();
    let modes = chain.mode_freqs();
    for (p, &wp) in modes.iter().enumerate() {
        for (i, &wn) in w.iter().enumerate() {
            let gap = (wn - wp).abs();
            if gap <= COLLISION_TOL * wp {
                return Err(Error::Collision { n: (basis.n_min as usize + i) as i64, p: p + 1, gap });
            }
        }
    }
    Ok(DMatrix::from_fn(modes.len(), w.len(), |p, i| {
        w[i] / (w[i] * w[i] - modes[p] * modes[p])
    }))
}

/// Row-normalized constraint rows used by the synthesis.
///
/// A mode whose frequency is an exact harmonic kΩ₀ satisfies closure iff
/// B_k = 0 (or automatically when k lies outside the basis); its row becomes
/// the unit vector on tone k.
pub fn constraint_matrix(chain: &ChainSpec, basis: PulseBasis, enforce_phi: bool) -> DMatrix<f64> {
    let w = basis.freqs();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for &wp in chain.mode_freqs() {
        let x = wp * basis.tau / (2.0 * PI);
        let k = x.round();
        if (x - k).abs() <= RESONANCE_TOL * x.max(1.0) {
            if k >= basis.n_min as f64 && k <= basis.n_max as f64 {
                let mut r = vec![0.0; w.len()];
                r[(k as u32 - basis.n_min) as usize] = 1.0;
                rows.push(r);
            }
            continue;
        }
        rows.push(w.iter().map(|&wn| wn / (wn * wn - wp * wp)).collect());
    }
    if enforce_phi {
        rows.push(basis.indices().map(|n| 1.0 / n as f64).collect());
    }
    for r in rows.iter_mut() {
        let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        r.iter_mut().for_each(|x| *x /= norm);
    }
    DMatrix::from_fn(rows.len(), w.len(), |i, j| rows[i][j])
}

/// Orthonormal basis (columns) of the null space of `a`.
pub fn null_space(a: &DMatrix<f64>) -> DMatrix<f64> {
    let (r, c) = a.shape();
    if r == 0 {
        return DMatrix::identity(c, c);
    }
    // Pad to square so the SVD returns a complete right basis.
    let mut sq = DMatrix::<f64>::zeros(r.max(c), c);
    sq.rows_mut(0, r).copy_from(a);
    let svd = sq.svd(false, true);
    let vt = svd.v_t.expect("right singular vectors requested");
    let smax = svd.singular_values.max();
    let tol = 1e-12 * c as f64 * smax.max(1e-300);
    let cols: Vec<DVector<f64>> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= tol)
        .map(|(i, _)| vt.row(i).transpose())
        .collect();
    if cols.is_empty() {
        return DMatrix::zeros(c, 0);
    }
    DMatrix::from_columns(&cols)
}

/// ∫₀^τ dt sin(ω_n t) ∫₀^t dt' sin(ω_m t') sin(ω_p(t − t')) for every tone pair.
#[derive(Debug, Clone)]
pub struct ModeKernels {
    basis: PulseBasis,
    kernels: Vec<DMatrix<f64>>,
    /// Constraint matrix and its null space, without and with the Φ row.
    constraints: [OnceLock<(DMatrix<f64>, DMatrix<f64>)>; 2],
}

impl ModeKernels {
    pub fn new(chain: &ChainSpec, basis: PulseBasis) -> Self {
        let w = basis.freqs();
        let tau = basis.tau;
        let kernels = chain
            .mode_freqs()
            .iter()
            .map(|&wp| {
                let mut k = DMatrix::<f64>::zeros(w.len(), w.len());
                for (i, &wn) in w.iter().enumerate() {
                    for (j, &wm) in w.iter().enumerate() {
                        // sin(ω_p(t−t')) → Im of e^{iω_p t}e^{−iω_p t'}; sines
                        // give −¼ Σ σσ' e^{iσω_n t} e^{iσ'ω_m t'}.
                        let mut d = C64::new(0.0, 0.0);
                        for s in [1.0, -1.0] {
                            for s2 in [1.0, -1.0] {
                                d += s * s2 * triangle(s * wn + wp, s2 * wm - wp, tau);
                            }
                        }
                        k[(i, j)] = (-0.25 * d).im;
                    }
                }
                k
            })
            .collect();
        ModeKernels { basis, kernels, constraints: Default::default() }
    }

    /// Constraint rows and null space for the chain these kernels were built from.
    pub fn constraints(&self, chain: &ChainSpec, enforce_phi: bool) -> &(DMatrix<f64>, DMatrix<f64>) {
        self.constraints[enforce_phi as usize].get_or_init(|| {
            let a = constraint_matrix(chain, self.basis, enforce_phi);
            let ns = null_space(&a);
            (a, ns)
        })
    }

    pub fn basis(&self) -> PulseBasis {
        self.basis
    }

    /// Per-mode kernel I_p (0-based mode).
    pub fn mode(&self, p: usize) -> &DMatrix<f64> {
        &self.kernels[p]
    }

    /// Σ_p w_p I_p, symmetrized.
    pub fn weighted(&self, weights: &[f64]) -> DMatrix<f64> {
        let n = self.basis.size();
        let mut k = DMatrix::<f64>::zeros(n, n);
        for (kp, &wp) in self.kernels.iter().zip(weights) {
            k += kp * wp;
        }
        (&k + k.transpose()) * 0.5
    }

    /// χ kernel 2 Σ_p η_p^{j1}η_p^{j2} I_p.
    pub fn chi_kernel(&self, chain: &ChainSpec, pair: GatePair) -> DMatrix<f64> {
        let w: Vec<f64> = chain.pair_products(pair).iter().map(|x| 2.0 * x).collect();
        self.weighted(&w)
    }
}

/// Symmetric matrix K with Bᵀ K B = χ.
pub fn chi_kernel(chain: &ChainSpec, pair: GatePair, basis: PulseBasis) -> DMatrix<f64> {
    ModeKernels::new(chain, basis).chi_kernel(chain, pair)
}

/// Bᵀ K B for a pulse.
pub fn chi_of(chain: &ChainSpec, pair: GatePair, pulse: &Pulse) -> f64 {
    quadratic_form(&chi_kernel(chain, pair, pulse.basis()), &pulse.coeffs)
}

pub fn quadratic_form(k: &DMatrix<f64>, b: &[f64]) -> f64 {
    let v = DVector::from_column_slice(b);
    (v.transpose() * k * &v)[(0, 0)]
}

/// How the eigenvector of the projected χ kernel is selected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChiSignPolicy {
    /// Largest positive eigenvalue: the minimum-power pulse with χ = +chi_target.
    /// Falls back to the most negative eigenvalue when none is positive.
    #[default]
    Positive,
    /// Largest |eigenvalue|; χ takes that eigenvalue's sign.
    LargestMagnitude,
}

/// Inputs to [`synthesize`].
#[derive(Debug, Clone)]
pub struct SynthesisRequest {
    pub chain: ChainSpec,
    pub pair: GatePair,
    pub tau: f64,
    pub chi_target: f64,
    /// Defaults to [`PulseBasis::default_for`].
    pub basis: Option<(u32, u32)>,
    pub enforce_phi: bool,
    /// Accepted relative closure residual.
    pub closure_tolerance: f64,
    pub sign_policy: ChiSignPolicy,
}

impl SynthesisRequest {
    pub fn new(chain: ChainSpec, pair: GatePair, tau: f64) -> Self {
        SynthesisRequest {
            chain,
            pair,
            tau,
            chi_target: PI / 4.0,
            basis: None,
            enforce_phi: false,
            closure_tolerance: 1e-12,
            sign_policy: ChiSignPolicy::Positive,
        }
    }

    pub fn with_phi(mut self, enforce: bool) -> Self {
        self.enforce_phi = enforce;
        self
    }

    pub fn with_basis(mut self, n_min: u32, n_max: u32) -> Self {
        self.basis = Some((n_min, n_max));
        self
    }

    pub fn resolve_basis(&self) -> Result<PulseBasis> {
        match self.basis {
            Some((lo, hi)) => PulseBasis::new(self.tau, lo, hi),
            None => PulseBasis::default_for(&self.chain, self.tau),
        }
    }
}

/// Power-optimal pulse meeting the closure (and optional Φ) constraints with |χ| = chi_target.
pub fn synthesize(req: &SynthesisRequest) -> Result<Pulse> {
    let basis = req.resolve_basis()?;
    let kernels = ModeKernels::new(&req.chain, basis);
    synthesize_with(req, &kernels)
}

/// [`synthesize`] with precomputed per-mode kernels (reused across pairs).
pub fn synthesize_with(req: &SynthesisRequest, kernels: &ModeKernels) -> Result<Pulse> {
    if !(req.chi_target > 0.0 && req.chi_target.is_finite()) {
        return Err(Error::InvalidArgument("chi_target must be positive".into()));
    }
    let basis = kernels.basis();
    let (a, ns) = kernels.constraints(&req.chain, req.enforce_phi);
    if ns.ncols() == 0 {
        return Err(Error::NullSpaceEmpty { rows: a.nrows(), cols: a.ncols() });
    }
    let k = kernels.chi_kernel(&req.chain, req.pair);
    let kp = ns.transpose() * &k * ns;
    let kp = (&kp + kp.transpose()) * 0.5;
    let eig = SymmetricEigen::new(kp);
    let lmax = eig.eigenvalues.amax();
    let scale = k.amax() * basis.tau * basis.tau;
    if lmax <= 1e-14 * scale.max(f64::MIN_POSITIVE) || lmax == 0.0 {
        return Err(Error::NoEntanglement);
    }
    let key = |l: f64| match req.sign_policy {
        ChiSignPolicy::LargestMagnitude => l.abs(),
        ChiSignPolicy::Positive => {
            if eig.eigenvalues.max() > 1e-14 * lmax {
                l
            } else {
                -l
            }
        }
    };
    let top = eig.eigenvalues.iter().map(|&l| key(l)).fold(f64::NEG_INFINITY, f64::max);
    // Candidates within a relative 1e-10 of the best key; ties go to the
    // vector whose first significant coefficient sits at the lowest tone.
    let lead_index = |b: &DVector<f64>| b.iter().position(|x| x.abs() > 1e-8 * b.norm()).unwrap_or(usize::MAX);
    let mut best: Option<(usize, DVector<f64>)> = None;
    for i in 0..eig.eigenvalues.len() {
        if key(eig.eigenvalues[i]) < top - 1e-10 * lmax {
            continue;
        }
        let b = ns * eig.eigenvectors.column(i);
        let better = match &best {
            None => true,
            Some((_, bb)) => lead_index(&b) < lead_index(bb),
        };
        if better {
            best = Some((i, b));
        }
    }
    let (idx, mut b) = best.expect("at least one eigenvalue attains the maximum");
    let lambda = eig.eigenvalues[idx];
    b *= (req.chi_target / lambda.abs()).sqrt();
    let imax = b.iamax();
    if b[imax] < 0.0 {
        b = -b;
    }
    if req.enforce_phi {
        // take the Φ row out once more so Σ B_n/n is zero to rounding
        let r = DVector::from_iterator(basis.size(), basis.indices().map(|n| 1.0 / n as f64));
        let r = &r / r.norm();
        b -= &r * r.dot(&b);
    }
    let mut pulse = Pulse::new(basis, b.iter().copied().collect())?;
    pulse.chi_sign = if lambda > 0.0 { 1 } else { -1 };
    pulse.provenance = Provenance {
        chain_sha256: Some(req.chain.content_hash()),
        pair: Some([req.pair.ions().0, req.pair.ions().1]),
        enforce_phi: req.enforce_phi,
        chi_target: Some(req.chi_target),
        calibration_factor: 1.0,
    };
    let resid = relative_residual(a, &pulse.coeffs);
    if resid > req.closure_tolerance.max(1e-12) {
        return Err(Error::InvalidArgument(format!(
            "constraint residual {resid:e} above tolerance {:e}",
            req.closure_tolerance
        )));
    }
    Ok(pulse)
}

/// max_i |a_i·B| / ‖B‖ for row-normalized constraint rows.
pub fn relative_residual(a: &DMatrix<f64>, b: &[f64]) -> f64 {
    let v = DVector::from_column_slice(b);
    let norm = v.norm();
    if norm == 0.0 {
        return 0.0;
    }
    (a * &v).amax() / norm
}

/// c = sqrt(chi_target/chi_actual).
pub fn calibration_factor(chi_target: f64, chi_actual: f64) -> Result<f64> {
    if chi_actual == 0.0 || !chi_actual.is_finite() {
        return Err(Error::InvalidArgument("chi_actual must be finite and nonzero".into()));
    }
    if chi_target.signum() != chi_actual.signum() {
        return Err(Error::InvalidArgument(format!(
            "chi_target {chi_target} and chi_actual {chi_actual} differ in sign"
        )));
    }
    Ok((chi_target / chi_actual).sqrt())
}
