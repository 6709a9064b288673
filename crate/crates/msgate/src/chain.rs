//! Ion-chain mode data: loading tabulated chains, generating synthetic ones,
//! and checking the mode-structure invariants.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Converts a frequency in MHz (ω/2π) to angular rad/s.
pub fn mhz_to_rad(f_mhz: f64) -> f64 {
    f_mhz * (2.0 * PI * 1e6)
}

/// Converts an angular frequency to MHz (ω/2π).
pub fn rad_to_mhz(w: f64) -> f64 {
    w / (2.0 * PI * 1e6)
}

/// Allowed cross-mode ion sum, relative to the largest per-mode norm.
pub const ORTHOGONALITY_TOL: f64 = 1e-4;
/// Allowed spread of the common-mode row, relative to the largest |η|.
pub const COMMON_MODE_TOL: f64 = 1e-4;

/// Transverse modes and Lamb-Dicke couplings of an N-ion chain.
///
/// `lamb_dicke` is row-major with rows indexed by mode and columns by ion.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSpec {
    mode_freqs: Vec<f64>,
    lamb_dicke: Vec<f64>,
}

impl ChainSpec {
    /// Builds a chain from angular frequencies (rad/s) and the mode-major η matrix.
    pub fn new(mode_freqs: Vec<f64>, eta: Vec<Vec<f64>>) -> Result<Self> {
        let n = mode_freqs.len();
        if n == 0 {
            return Err(Error::InvalidChain("chain has no modes".into()));
        }
        if eta.len() != n {
            return Err(Error::Dimension(format!(
                "{n} mode frequencies but {} eta rows",
                eta.len()
            )));
        }
        if let Some((p, row)) = eta.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(Error::Dimension(format!(
                "eta row {} has {} entries, expected {n}",
                p + 1,
                row.len()
            )));
        }
        let spec = ChainSpec {
            mode_freqs,
            lamb_dicke: eta.into_iter().flatten().collect(),
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        let n = self.n_ions();
        if self.mode_freqs.iter().chain(&self.lamb_dicke).any(|x| !x.is_finite()) {
            return Err(Error::InvalidChain("non-finite entry".into()));
        }
        if self.mode_freqs[0] <= 0.0 {
            return Err(Error::InvalidChain("mode frequencies must be positive".into()));
        }
        if let Some(p) = (1..n).find(|&p| self.mode_freqs[p] <= self.mode_freqs[p - 1]) {
            return Err(Error::InvalidChain(format!(
                "mode frequencies not strictly increasing at mode {}",
                p + 1
            )));
        }
        let norms: Vec<f64> = (0..n)
            .map(|p| self.mode_row(p).iter().map(|x| x * x).sum())
            .collect();
        let tol = ORTHOGONALITY_TOL * norms.iter().cloned().fold(0.0, f64::max);
        for p in 0..n {
            for q in p + 1..n {
                let dot: f64 = self.mode_row(p).iter().zip(self.mode_row(q)).map(|(a, b)| a * b).sum();
                if dot.abs() > tol {
                    return Err(Error::InvalidChain(format!(
                        "modes {} and {} not orthogonal (ion sum {dot:e})",
                        p + 1,
                        q + 1
                    )));
                }
            }
        }
        let common = self.common_modes();
        if common.len() != 1 {
            return Err(Error::InvalidChain(format!(
                "expected exactly one common mode, found {}",
                common.len()
            )));
        }
        Ok(())
    }

    /// Indices of modes whose η row is constant across ions.
    pub fn common_modes(&self) -> Vec<usize> {
        let scale = self.lamb_dicke.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let tol = COMMON_MODE_TOL * scale;
        (0..self.n_ions())
            .filter(|&p| {
                let row = self.mode_row(p);
                row.iter().all(|x| (x - row[0]).abs() <= tol) && row[0] != 0.0
            })
            .collect()
    }

    pub fn n_ions(&self) -> usize {
        self.mode_freqs.len()
    }

    /// Angular mode frequencies ω_p in rad/s, ascending.
    pub fn mode_freqs(&self) -> &[f64] {
        &self.mode_freqs
    }

    /// η_p^j with 0-based mode `p` and ion `j`.
    pub fn eta(&self, p: usize, j: usize) -> f64 {
        self.lamb_dicke[p * self.n_ions() + j]
    }

    /// Row of η for mode `p` (0-based), indexed by ion.
    pub fn mode_row(&self, p: usize) -> &[f64] {
        let n = self.n_ions();
        &self.lamb_dicke[p * n..(p + 1) * n]
    }

    /// Column of η for ion `j` (0-based), indexed by mode.
    pub fn ion_column(&self, j: usize) -> Vec<f64> {
        (0..self.n_ions()).map(|p| self.eta(p, j)).collect()
    }

    pub fn eta_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n_ions()).map(|p| self.mode_row(p).to_vec()).collect()
    }

    /// Sum of η² over both ions of the pair and all modes.
    pub fn pair_eta_square_sum(&self, pair: GatePair) -> f64 {
        let (a, b) = pair.indices();
        (0..self.n_ions())
            .map(|p| self.eta(p, a).powi(2) + self.eta(p, b).powi(2))
            .sum()
    }

    /// Mode-wise products η_p^{j1} η_p^{j2}.
    pub fn pair_products(&self, pair: GatePair) -> Vec<f64> {
        let (a, b) = pair.indices();
        (0..self.n_ions()).map(|p| self.eta(p, a) * self.eta(p, b)).collect()
    }

    /// Returns a copy with every η multiplied by `c`.
    pub fn with_eta_scaled(&self, c: f64) -> Result<Self> {
        ChainSpec::new(
            self.mode_freqs.clone(),
            self.eta_rows()
                .into_iter()
                .map(|r| r.into_iter().map(|x| x * c).collect())
                .collect(),
        )
    }

    pub fn to_document(&self) -> ChainDocument {
        ChainDocument {
            n_ions: self.n_ions(),
            mode_freqs_mhz: self.mode_freqs.iter().map(|&w| rad_to_mhz(w)).collect(),
            eta: self.eta_rows(),
            mode_freqs_rad_s: Some(self.mode_freqs.clone()),
        }
    }

    pub fn from_document(doc: ChainDocument) -> Result<Self> {
        if doc.n_ions != doc.mode_freqs_mhz.len() {
            return Err(Error::Dimension(format!(
                "n_ions = {} but {} mode frequencies",
                doc.n_ions,
                doc.mode_freqs_mhz.len()
            )));
        }
        let freqs = match doc.mode_freqs_rad_s {
            Some(exact) => {
                if exact.len() != doc.n_ions {
                    return Err(Error::Dimension("mode_freqs_rad_s length differs from n_ions".into()));
                }
                for (w, f) in exact.iter().zip(&doc.mode_freqs_mhz) {
                    if (rad_to_mhz(*w) - f).abs() > 1e-9 * f.abs().max(1.0) {
                        return Err(Error::Malformed(
                            "mode_freqs_rad_s disagrees with mode_freqs_mhz".into(),
                        ));
                    }
                }
                exact
            }
            None => doc.mode_freqs_mhz.iter().map(|&f| mhz_to_rad(f)).collect(),
        };
        ChainSpec::new(freqs, doc.eta)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("chain document serializes")
    }

    /// SHA-256 of the canonical (compact) JSON document.
    pub fn content_hash(&self) -> String {
        let compact = serde_json::to_string(&self.to_document()).expect("chain document serializes");
        hex::encode(Sha256::digest(compact.as_bytes()))
    }
}

/// On-disk chain document. Frequencies are ω/2π in MHz; the optional
/// `mode_freqs_rad_s` carries exact angular values so that a save/load
/// cycle is bit-identical.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ChainDocument {
    pub n_ions: usize,
    pub mode_freqs_mhz: Vec<f64>,
    pub eta: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode_freqs_rad_s: Option<Vec<f64>>,
}

/// Parses a chain document from JSON text.
pub fn load_chain(text: &str) -> Result<ChainSpec> {
    let doc: ChainDocument =
        serde_json::from_str(text).map_err(|e| Error::Malformed(e.to_string()))?;
    ChainSpec::from_document(doc)
}

pub fn load_chain_file(path: impl AsRef<Path>) -> Result<ChainSpec> {
    load_chain(&std::fs::read_to_string(path)?)
}

pub fn save_chain(spec: &ChainSpec) -> String {
    spec.to_json()
}

/// The bundled 7-ion chain (mode frequencies and Lamb-Dicke table).
pub const SEVEN_ION_CHAIN_JSON: &str = include_str!("../data/chain7.json");

pub fn seven_ion_chain() -> ChainSpec {
    load_chain(SEVEN_ION_CHAIN_JSON).expect("bundled chain is valid")
}

/// Two distinct ions addressed by the same pulse, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GatePair {
    j1: usize,
    j2: usize,
}

impl GatePair {
    pub fn new(j1: usize, j2: usize, n_ions: usize) -> Result<Self> {
        if j1 == j2 || j1 == 0 || j2 == 0 || j1 > n_ions || j2 > n_ions {
            return Err(Error::InvalidPair { j1, j2, n: n_ions });
        }
        Ok(GatePair { j1, j2 })
    }

    pub fn for_chain(j1: usize, j2: usize, chain: &ChainSpec) -> Result<Self> {
        Self::new(j1, j2, chain.n_ions())
    }

    /// Parses "2,5".
    pub fn parse(s: &str, n_ions: usize) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let idx = |x: &str| {
            x.parse::<usize>()
                .map_err(|_| Error::InvalidArgument(format!("bad ion index '{x}' in pair '{s}'")))
        };
        match parts.as_slice() {
            [a, b] => Self::new(idx(a)?, idx(b)?, n_ions),
            _ => Err(Error::InvalidArgument(format!("pair '{s}' must look like 2,5"))),
        }
    }

    /// 1-based ion labels.
    pub fn ions(&self) -> (usize, usize) {
        (self.j1, self.j2)
    }

    /// 0-based ion indices.
    pub fn indices(&self) -> (usize, usize) {
        (self.j1 - 1, self.j2 - 1)
    }

    /// Every unordered pair of an N-ion chain, lexicographic.
    pub fn all(n_ions: usize) -> Vec<GatePair> {
        (1..=n_ions)
            .flat_map(|a| (a + 1..=n_ions).map(move |b| GatePair { j1: a, j2: b }))
            .collect()
    }
}

impl fmt::Display for GatePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.j1, self.j2)
    }
}

/// Transverse normal modes in trap units.
#[derive(Debug, Clone)]
pub struct NormalModes {
    /// Dimensionless axial equilibrium positions.
    pub positions: Vec<f64>,
    /// Mode frequencies divided by the common-mode frequency, ascending.
    pub freq_ratios: Vec<f64>,
    /// Orthonormal eigenvectors, one row per mode (same order as `freq_ratios`).
    pub vectors: DMatrix<f64>,
}

const NEWTON_MAX_ITERS: usize = 200;

/// Axial equilibrium of N ions in a harmonic well, in units of
/// (e²/4πε₀ m ω_z²)^{1/3}.
pub fn equilibrium_positions(n: usize) -> Result<Vec<f64>> {
    if n == 1 {
        return Ok(vec![0.0]);
    }
    let spacing = 2.018 * (n as f64).powf(-0.559);
    let mut u: Vec<f64> = (0..n).map(|i| spacing * (i as f64 - (n as f64 - 1.0) / 2.0)).collect();

    let residual = |u: &[f64]| -> DVector<f64> {
        DVector::from_iterator(
            n,
            (0..n).map(|i| {
                let coulomb: f64 = (0..n)
                    .filter(|&k| k != i)
                    .map(|k| {
                        let d = u[i] - u[k];
                        d.signum() / (d * d)
                    })
                    .sum();
                u[i] - coulomb
            }),
        )
    };

    let mut r = residual(&u);
    for _ in 0..NEWTON_MAX_ITERS {
        let rn = r.norm();
        if rn < 1e-13 * n as f64 {
            return Ok(u);
        }
        let mut jac = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            let mut diag = 1.0;
            for k in (0..n).filter(|&k| k != i) {
                let c = 2.0 / (u[i] - u[k]).abs().powi(3);
                diag += c;
                jac[(i, k)] = -c;
            }
            jac[(i, i)] = diag;
        }
        let step = jac
            .lu()
            .solve(&(-&r))
            .ok_or(Error::NewtonDiverged { iters: 0, residual: rn })?;
        // Backtrack until the residual drops and the ordering is preserved.
        let mut lambda = 1.0;
        loop {
            let trial: Vec<f64> = u.iter().zip(step.iter()).map(|(a, s)| a + lambda * s).collect();
            let ordered = trial.windows(2).all(|w| w[1] > w[0]);
            if ordered {
                let rt = residual(&trial);
                if rt.norm() < rn || lambda < 1e-6 {
                    u = trial;
                    r = rt;
                    break;
                }
            }
            lambda *= 0.5;
            if lambda < 1e-12 {
                return Err(Error::NewtonDiverged { iters: 0, residual: rn });
            }
        }
    }
    Err(Error::NewtonDiverged { iters: NEWTON_MAX_ITERS, residual: r.norm() })
}

/// Transverse normal modes for anisotropy ω_z/ω_x.
pub fn normal_modes(n: usize, trap_anisotropy: f64) -> Result<NormalModes> {
    if !(trap_anisotropy > 0.0 && trap_anisotropy.is_finite()) {
        return Err(Error::InvalidArgument("trap anisotropy must be positive".into()));
    }
    let u = equilibrium_positions(n)?;
    let beta2 = trap_anisotropy.powi(-2);
    let mut hess = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let mut diag = beta2;
        for k in (0..n).filter(|&k| k != i) {
            let c = 1.0 / (u[i] - u[k]).abs().powi(3);
            diag -= c;
            hess[(i, k)] = c;
        }
        hess[(i, i)] = diag;
    }
    let eig = SymmetricEigen::new(hess);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    if let Some(&bad) = order.iter().find(|&&m| eig.eigenvalues[m] <= 0.0) {
        return Err(Error::UnstableMode { index: bad, value: eig.eigenvalues[bad] });
    }
    let mut vectors = DMatrix::<f64>::zeros(n, n);
    for (row, &m) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(m).into_owned();
        // Deterministic sign: first component of non-negligible size is positive.
        if let Some(lead) = v.iter().find(|x| x.abs() > 1e-8) {
            if *lead < 0.0 {
                v = -v;
            }
        }
        vectors.row_mut(row).copy_from(&v.transpose());
    }
    let freq_ratios = order
        .iter()
        .map(|&m| (eig.eigenvalues[m] / beta2).sqrt())
        .collect();
    Ok(NormalModes { positions: u, freq_ratios, vectors })
}

/// Generates a chain from a harmonic-trap Coulomb crystal.
///
/// `trap_anisotropy` is ω_z/ω_x; `com_freq` is the transverse common-mode
/// angular frequency; `lamb_dicke_scale_ref` is the common-mode η.
pub fn synthesize_chain(
    n_ions: usize,
    trap_anisotropy: f64,
    com_freq: f64,
    lamb_dicke_scale_ref: f64,
) -> Result<ChainSpec> {
    if n_ions < 2 {
        return Err(Error::InvalidArgument("synthetic chains need at least 2 ions".into()));
    }
    if !(com_freq > 0.0) {
        return Err(Error::InvalidArgument("common-mode frequency must be positive".into()));
    }
    let modes = normal_modes(n_ions, trap_anisotropy)?;
    let scale = lamb_dicke_scale_ref * (n_ions as f64).sqrt();
    let freqs: Vec<f64> = modes.freq_ratios.iter().map(|r| r * com_freq).collect();
    let eta = (0..n_ions)
        .map(|p| {
            let w = (com_freq / freqs[p]).sqrt();
            (0..n_ions).map(|j| modes.vectors[(p, j)] * scale * w).collect()
        })
        .collect();
    ChainSpec::new(freqs, eta)
}
