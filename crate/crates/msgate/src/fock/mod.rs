//! Joint two-qubit ⊗ phonon state propagation in a truncated Fock space.
//!
//! State layout: index = (2a + b)·D + phonon index, the phonon index in mixed
//! radix with mode 1 most significant. The Hamiltonian is written as
//! g(t)·U(t) H₀ U(t)† with U(t) = exp(iΣ_p ω_p n̂_p t), so all matrix elements
//! are static and the time dependence reduces to diagonal phases.

mod elements;
mod hamiltonian;
mod propagate;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::chain::{ChainSpec, GatePair};
use crate::error::{Error, Result};
use crate::pulse::Pulse;
use crate::C64;

pub use elements::{displacement_elements, displacement_elements_with, laguerre, single_mode_displacement, v_power_elements};
pub use hamiltonian::Hamiltonian;
pub use propagate::{
    converge_scheme, default_dt, hs_sector_infidelity, propagate, propagate_many, ConvergedScheme, Run,
    NORM_GATE,
};

/// Default cap on the phonon-space dimension Π(m_p + 1).
pub const DEFAULT_DIM_CAP: usize = 1_000_000;

/// Dense matrices above this phonon dimension are refused.
pub const DENSE_DIM_CAP: usize = 4096;

/// Per-mode maximum occupation numbers.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PhononScheme {
    max_occ: Vec<u32>,
}

impl PhononScheme {
    pub fn new(max_occ: Vec<u32>) -> Result<Self> {
        Self::with_cap(max_occ, DEFAULT_DIM_CAP)
    }

    pub fn with_cap(max_occ: Vec<u32>, cap: usize) -> Result<Self> {
        if max_occ.is_empty() {
            return Err(Error::InvalidArgument("phonon scheme needs at least one mode".into()));
        }
        let s = PhononScheme { max_occ };
        let dim = s.dim_checked();
        match dim {
            Some(d) if d <= cap => Ok(s),
            _ => Err(Error::DimensionCap { dim: dim.unwrap_or(usize::MAX), cap }),
        }
    }

    /// All modes truncated at occupation `m`.
    pub fn uniform(n_modes: usize, m: u32) -> Result<Self> {
        Self::new(vec![m; n_modes])
    }

    /// Parses "2621111" (one digit per mode) or "2,6,2,1,1,1,1".
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidArgument(format!("bad phonon scheme '{s}'"));
        let occ: Vec<u32> = if s.contains(',') {
            s.split(',').map(|x| x.trim().parse().map_err(|_| bad())).collect::<Result<_>>()?
        } else {
            s.chars().map(|c| c.to_digit(10).ok_or_else(bad)).collect::<Result<_>>()?
        };
        Self::new(occ)
    }

    pub fn max_occ(&self) -> &[u32] {
        &self.max_occ
    }

    pub fn n_modes(&self) -> usize {
        self.max_occ.len()
    }

    /// Per-mode dimensions m_p + 1.
    pub fn dims(&self) -> Vec<usize> {
        self.max_occ.iter().map(|&m| m as usize + 1).collect()
    }

    fn dim_checked(&self) -> Option<usize> {
        self.max_occ.iter().try_fold(1usize, |acc, &m| acc.checked_mul(m as usize + 1))
    }

    /// Phonon-space dimension.
    pub fn dim(&self) -> usize {
        self.dim_checked().expect("checked at construction")
    }

    /// Stride of mode p in the mixed-radix phonon index.
    pub fn strides(&self) -> Vec<usize> {
        let dims = self.dims();
        let mut s = vec![1; dims.len()];
        for p in (0..dims.len().saturating_sub(1)).rev() {
            s[p] = s[p + 1] * dims[p + 1];
        }
        s
    }

    pub fn phonon_index(&self, occ: &[u32]) -> Result<usize> {
        if occ.len() != self.n_modes() || occ.iter().zip(&self.max_occ).any(|(n, m)| n > m) {
            return Err(Error::InvalidArgument(format!("occupation {occ:?} outside scheme {self}")));
        }
        Ok(occ.iter().zip(self.strides()).map(|(&n, s)| n as usize * s).sum())
    }

    /// Inverse of [`phonon_index`](Self::phonon_index).
    pub fn occupations(&self, mut index: usize) -> Vec<u32> {
        let strides = self.strides();
        strides
            .iter()
            .map(|&s| {
                let n = index / s;
                index %= s;
                n as u32
            })
            .collect()
    }

    /// The scheme with mode p's cutoff raised by one.
    pub fn incremented(&self, p: usize, cap: usize) -> Result<Self> {
        let mut occ = self.max_occ.clone();
        occ[p] += 1;
        Self::with_cap(occ, cap)
    }
}

impl fmt::Display for PhononScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.max_occ.iter().all(|&m| m < 10) {
            for m in &self.max_occ {
                write!(f, "{m}")?;
            }
            Ok(())
        } else {
            let parts: Vec<String> = self.max_occ.iter().map(|m| m.to_string()).collect();
            write!(f, "{}", parts.join(","))
        }
    }
}

/// Amplitudes A^{(a,b)}_{m₁…m_N}.
#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    scheme: PhononScheme,
    amps: Vec<C64>,
}

/// Documented index map written alongside serialized states.
pub const INDEX_MAP: &str =
    "index = (2a+b)*D + sum_p n_p*stride_p; stride_N = 1, stride_p = stride_{p+1}*(m_{p+1}+1); D = prod_p (m_p+1)";

#[derive(Serialize, Deserialize)]
struct StateDocument {
    scheme: Vec<u32>,
    index_map: String,
    amplitudes: Vec<[f64; 2]>,
}

impl JointState {
    /// comp ⊗ |0…0⟩_ph with comp amplitudes ordered |00⟩,|01⟩,|10⟩,|11⟩.
    pub fn product(scheme: &PhononScheme, comp: [C64; 4]) -> Self {
        let d = scheme.dim();
        let mut amps = vec![C64::new(0.0, 0.0); 4 * d];
        for (c, a) in comp.iter().enumerate() {
            amps[c * d] = *a;
        }
        JointState { scheme: scheme.clone(), amps }
    }

    /// |ab⟩ ⊗ vacuum.
    pub fn basis(scheme: &PhononScheme, a: u8, b: u8) -> Self {
        let mut comp = [C64::new(0.0, 0.0); 4];
        comp[comp_index(a, b)] = C64::new(1.0, 0.0);
        Self::product(scheme, comp)
    }

    pub fn from_amplitudes(scheme: PhononScheme, amps: Vec<C64>) -> Result<Self> {
        if amps.len() != 4 * scheme.dim() {
            return Err(Error::Dimension(format!(
                "{} amplitudes for scheme {scheme} (need {})",
                amps.len(),
                4 * scheme.dim()
            )));
        }
        Ok(JointState { scheme, amps })
    }

    pub fn scheme(&self) -> &PhononScheme {
        &self.scheme
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn amplitude(&self, a: u8, b: u8, occ: &[u32]) -> Result<C64> {
        let i = self.scheme.phonon_index(occ)?;
        Ok(self.amps[comp_index(a, b) * self.scheme.dim() + i])
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// ⟨ab, vac|ψ⟩ for the four computational labels.
    pub fn vacuum_projection(&self) -> [C64; 4] {
        let d = self.scheme.dim();
        [self.amps[0], self.amps[d], self.amps[2 * d], self.amps[3 * d]]
    }

    /// Block of phonon amplitudes for computational label c = 2a + b.
    pub fn block(&self, c: usize) -> &[C64] {
        let d = self.scheme.dim();
        &self.amps[c * d..(c + 1) * d]
    }

    /// Total population outside the phonon vacuum.
    pub fn excited_population(&self) -> f64 {
        let vac: f64 = self.vacuum_projection().iter().map(|a| a.norm_sqr()).sum();
        self.norm().powi(2) - vac
    }

    pub fn max_abs_diff(&self, other: &JointState) -> f64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> String {
        let doc = StateDocument {
            scheme: self.scheme.max_occ.clone(),
            index_map: INDEX_MAP.to_string(),
            amplitudes: self.amps.iter().map(|a| [a.re, a.im]).collect(),
        };
        serde_json::to_string(&doc).expect("state serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: StateDocument = serde_json::from_str(text)?;
        let scheme = PhononScheme::new(doc.scheme)?;
        let amps = doc.amplitudes.iter().map(|[re, im]| C64::new(*re, *im)).collect();
        Self::from_amplitudes(scheme, amps)
    }
}

/// c = 2a + b.
pub fn comp_index(a: u8, b: u8) -> usize {
    2 * (a as usize & 1) + (b as usize & 1)
}

/// Which Hamiltonian of the family to propagate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HamiltonianKind {
    /// cos V σ_y + sin V σ_x with exact displacement-operator elements.
    FullMs,
    /// cos and sin replaced by their Taylor polynomials to orders nc and ns;
    /// nc = −2 drops the σ_y term altogether.
    Expanded { nc: i32, ns: i32 },
}

impl HamiltonianKind {
    /// H_S: the σ_x term linear in V only.
    pub const HS: HamiltonianKind = HamiltonianKind::Expanded { nc: -2, ns: 1 };

    pub fn expanded(nc: i32, ns: i32) -> Result<Self> {
        if ![-2, 0, 2, 4].contains(&nc) || ![1, 3, 5].contains(&ns) {
            return Err(Error::InvalidArgument(format!(
                "expansion orders (nc, ns) = ({nc}, {ns}); need nc in {{-2,0,2,4}}, ns in {{1,3,5}}"
            )));
        }
        Ok(HamiltonianKind::Expanded { nc, ns })
    }

    /// "full", "hs", or "nc,ns".
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "full" | "ms" => Ok(HamiltonianKind::FullMs),
            "hs" | "HS" => Ok(Self::HS),
            other => {
                let bad = || Error::InvalidArgument(format!("bad Hamiltonian '{other}'"));
                let (a, b) = other.split_once(',').ok_or_else(bad)?;
                Self::expanded(a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?)
            }
        }
    }
}

impl fmt::Display for HamiltonianKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HamiltonianKind::FullMs => write!(f, "full"),
            HamiltonianKind::Expanded { nc, ns } => write!(f, "{nc},{ns}"),
        }
    }
}

/// Everything that defines H(t).
#[derive(Debug, Clone)]
pub struct HamiltonianSpec {
    pub kind: HamiltonianKind,
    pub chain: ChainSpec,
    pub pair: GatePair,
    pub pulse: Pulse,
}

impl HamiltonianSpec {
    pub fn new(kind: HamiltonianKind, chain: ChainSpec, pair: GatePair, pulse: Pulse) -> Self {
        HamiltonianSpec { kind, chain, pair, pulse }
    }

    pub fn with_pulse(&self, pulse: Pulse) -> Self {
        HamiltonianSpec { pulse, ..self.clone() }
    }

    pub fn with_kind(&self, kind: HamiltonianKind) -> Self {
        HamiltonianSpec { kind, ..self.clone() }
    }
}
