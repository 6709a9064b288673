//! State, process and average-gate fidelities against e^{iχσ_xσ_x}, gate
//! angle extraction and the amplitude calibration loop.
//!
//! Computational labels are ordered |00⟩, |01⟩, |10⟩, |11⟩ with the first
//! ion of the pair as the most significant qubit.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix4, SMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{propagate, propagate_many, HamiltonianSpec, JointState, PhononScheme, Run};
use crate::pulse::{calibration_factor, Pulse};
use crate::C64;

pub type Mat4 = Matrix4<C64>;
type Superop = SMatrix<C64, 16, 16>;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };
const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Below this, both |00⟩ and |11⟩ projections count as lost.
pub const MANIFOLD_FLOOR: f64 = 1e-3;
/// Calibration stops once |χ − χ_target| falls below this.
pub const CALIBRATION_TOL: f64 = 1e-6;

/// Single-qubit Pauli matrix: 0 = I, 1 = X, 2 = Y, 3 = Z.
pub fn pauli(k: usize) -> Matrix2<C64> {
    match k {
        0 => Matrix2::new(ONE, ZERO, ZERO, ONE),
        1 => Matrix2::new(ZERO, ONE, ONE, ZERO),
        2 => Matrix2::new(ZERO, -I, I, ZERO),
        3 => Matrix2::new(ONE, ZERO, ZERO, -ONE),
        _ => panic!("Pauli index {k} out of range"),
    }
}

/// σ_a ⊗ σ_b on the two-qubit space.
pub fn pauli2(a: usize, b: usize) -> Mat4 {
    let m = pauli(a).kronecker(&pauli(b));
    Mat4::from_fn(|i, j| m[(i, j)])
}

/// The 16 two-qubit Pauli products, index 4a + b.
pub fn pauli_basis() -> Vec<Mat4> {
    (0..16).map(|k| pauli2(k / 4, k % 4)).collect()
}

/// e^{iχσ_x⊗σ_x} = cos χ + i sin χ σ_x⊗σ_x.
pub fn xx_gate(chi: f64) -> Mat4 {
    Mat4::identity() * C64::new(chi.cos(), 0.0) + pauli2(1, 1) * C64::new(0.0, chi.sin())
}

/// How phonons are removed from the joint output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelMode {
    /// Partial trace over the phonon space (trace preserving).
    #[default]
    Traced,
    /// Projection onto the phonon vacuum (trace decreasing).
    VacuumConditioned,
}

/// A map on two-qubit density matrices stored as its 16×16 Liouville
/// matrix (column-stacking: vec(ρ)[i + 4j] = ρ_ij).
#[derive(Debug, Clone, PartialEq)]
pub struct GateChannel {
    superop: Superop,
}

fn vec4(m: &Mat4) -> SMatrix<C64, 16, 1> {
    SMatrix::from_fn(|k, _| m[(k % 4, k / 4)])
}

fn unvec4(v: &SMatrix<C64, 16, 1>) -> Mat4 {
    Mat4::from_fn(|i, j| v[i + 4 * j])
}

impl GateChannel {
    /// ρ → Σ_k K_k ρ K_k†.
    pub fn from_kraus(kraus: &[Mat4]) -> Self {
        let mut superop = Superop::zeros();
        for k in kraus {
            superop += k.conjugate().kronecker(k);
        }
        GateChannel { superop }
    }

    pub fn from_unitary(u: &Mat4) -> Self {
        Self::from_kraus(std::slice::from_ref(u))
    }

    pub fn identity() -> Self {
        Self::from_unitary(&Mat4::identity())
    }

    /// Channel from the final joint states of the four basis inputs
    /// |ab⟩⊗|0⟩_ph, ordered |00⟩, |01⟩, |10⟩, |11⟩.
    ///
    /// Kraus operators are indexed by the final phonon configuration k:
    /// (K_k)_{c', c} = ⟨c', k|ψ_c⟩.
    pub fn from_runs(states: &[JointState], mode: ChannelMode) -> Result<Self> {
        if states.len() != 4 {
            return Err(Error::Dimension(format!("{} basis runs, need 4", states.len())));
        }
        let scheme = states[0].scheme();
        if states.iter().any(|s| s.scheme() != scheme) {
            return Err(Error::Dimension("basis runs use different phonon schemes".into()));
        }
        let d = match mode {
            ChannelMode::Traced => scheme.dim(),
            ChannelMode::VacuumConditioned => 1,
        };
        let kraus: Vec<Mat4> =
            (0..d).map(|k| Mat4::from_fn(|out, inp| states[inp].block(out)[k])).collect();
        Ok(Self::from_kraus(&kraus))
    }

    pub fn superop(&self) -> &SMatrix<C64, 16, 16> {
        &self.superop
    }

    pub fn apply(&self, rho: &Mat4) -> Mat4 {
        unvec4(&(self.superop * vec4(rho)))
    }

    /// max over matrix units |Tr ℰ(|i⟩⟨j|) − δ_ij|.
    pub fn trace_preservation_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                let mut e = Mat4::zeros();
                e[(i, j)] = ONE;
                let want = if i == j { ONE } else { ZERO };
                worst = worst.max((self.apply(&e).trace() - want).norm());
            }
        }
        worst
    }

    /// max over Pauli inputs of ‖ℰ(P) − ℰ(P)†‖_max.
    pub fn hermiticity_error(&self) -> f64 {
        pauli_basis()
            .iter()
            .map(|p| {
                let out = self.apply(p);
                (out - out.adjoint()).camax()
            })
            .fold(0.0, f64::max)
    }
}

/// F_P = Tr[ℰ_exact† ℰ]/16 with ℰ_exact the channel of e^{iχσ_xσ_x}.
pub fn process_fidelity(channel: &GateChannel, chi: f64) -> f64 {
    let exact = GateChannel::from_unitary(&xx_gate(chi));
    (exact.superop.adjoint() * channel.superop).trace().re / 16.0
}

/// F_G = (Σ_j Tr[U U_j† U† ℰ(U_j)] + d²) / (d²(d + 1)) over the 16 Pauli
/// products, d = 4.
pub fn average_gate_fidelity(channel: &GateChannel, chi: f64) -> f64 {
    let u = xx_gate(chi);
    let sum: C64 = pauli_basis()
        .iter()
        .map(|p| (u * p.adjoint() * u.adjoint() * channel.apply(p)).trace())
        .sum();
    (sum.re + 16.0) / 80.0
}

/// F_S = |⟨ψ_ideal|ψ⟩|² with ψ_ideal = (e^{iχσ_xσ_x}ψ₀) ⊗ |0⟩_ph.
pub fn state_fidelity(state: &JointState, chi: f64, psi0: [C64; 4]) -> f64 {
    let ideal = xx_gate(chi) * nalgebra::Vector4::from(psi0);
    let vac = state.vacuum_projection();
    let overlap: C64 = (0..4).map(|c| ideal[c].conj() * vac[c]).sum();
    overlap.norm_sqr()
}

/// Gate angle read off a run started in |00⟩⊗|0⟩_ph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiEstimate {
    /// Signed angle; the sign follows arg(⟨11|ψ⟩/⟨00|ψ⟩) ≈ ±π/2.
    pub chi: f64,
    pub p00: f64,
    pub p11: f64,
    /// Population outside span{|00,vac⟩, |11,vac⟩}.
    pub leakage: f64,
}

/// χ = ±atan2(|⟨11,vac|ψ⟩|, |⟨00,vac|ψ⟩|).
pub fn extract_chi(state: &JointState) -> Result<ChiEstimate> {
    let v = state.vacuum_projection();
    let (a00, a11) = (v[0], v[3]);
    let (p00, p11) = (a00.norm(), a11.norm());
    if p00 < MANIFOLD_FLOOR && p11 < MANIFOLD_FLOOR {
        return Err(Error::ManifoldLost { p00, p11 });
    }
    let magnitude = p11.atan2(p00);
    // i sin χ/cos χ: the phase of a11/a00 sits near +π/2 for χ > 0
    let sign = if p00 == 0.0 || p11 == 0.0 { 1.0 } else { (a11 / a00).arg().signum() };
    let leakage = (state.norm().powi(2) - p00 * p00 - p11 * p11).max(0.0);
    Ok(ChiEstimate { chi: sign * magnitude, p00, p11, leakage })
}

/// Gate-angle error measured along the target's sign, so an under-rotation
/// is negative for either sign of χ_target.
pub fn rotation_error(chi: f64, chi_target: f64) -> f64 {
    chi_target.signum() * (chi - chi_target)
}

/// All fidelity metrics for one channel and its |00⟩ run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FidelityReport {
    pub chi_target: f64,
    pub chi: f64,
    pub delta_chi: f64,
    pub leakage: f64,
    pub state_fidelity: f64,
    pub process_fidelity: f64,
    pub average_gate_fidelity: f64,
    pub state_infidelity: f64,
    pub process_infidelity: f64,
    pub average_gate_infidelity: f64,
}

impl FidelityReport {
    /// `runs` are the four basis runs; |00⟩ supplies F_S and χ.
    pub fn new(runs: &[JointState], chi_target: f64, mode: ChannelMode) -> Result<Self> {
        let channel = GateChannel::from_runs(runs, mode)?;
        let est = extract_chi(&runs[0])?;
        let fs = state_fidelity(&runs[0], chi_target, [ONE, ZERO, ZERO, ZERO]);
        let fp = process_fidelity(&channel, chi_target);
        let fg = average_gate_fidelity(&channel, chi_target);
        Ok(FidelityReport {
            chi_target,
            chi: est.chi,
            delta_chi: rotation_error(est.chi, chi_target),
            leakage: est.leakage,
            state_fidelity: fs,
            process_fidelity: fp,
            average_gate_fidelity: fg,
            state_infidelity: 1.0 - fs,
            process_infidelity: 1.0 - fp,
            average_gate_infidelity: 1.0 - fg,
        })
    }
}

/// Basis runs and the channel built from them.
#[derive(Debug, Clone)]
pub struct ChannelRun {
    pub channel: GateChannel,
    pub runs: Vec<Run>,
}

impl ChannelRun {
    pub fn states(&self) -> Vec<JointState> {
        self.runs.iter().map(|r| r.state.clone()).collect()
    }
}

fn basis_inputs(scheme: &PhononScheme) -> Vec<JointState> {
    [(0, 0), (0, 1), (1, 0), (1, 1)].iter().map(|&(a, b)| JointState::basis(scheme, a, b)).collect()
}

/// Propagates the four basis inputs on up to `jobs` threads and builds the
/// channel. Results do not depend on `jobs`.
pub fn gate_channel(
    spec: &HamiltonianSpec,
    scheme: &PhononScheme,
    dt: f64,
    mode: ChannelMode,
    jobs: usize,
) -> Result<ChannelRun> {
    let inputs = basis_inputs(scheme);
    let runs = if jobs <= 1 {
        propagate_many(spec, scheme, &inputs, dt)?
    } else {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.min(4))
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
        pool.install(|| inputs.par_iter().map(|p| propagate(spec, scheme, p, dt)).collect::<Result<Vec<_>>>())?
    };
    let states: Vec<JointState> = runs.iter().map(|r| r.state.clone()).collect();
    let channel = GateChannel::from_runs(&states, mode)?;
    Ok(ChannelRun { channel, runs })
}

/// As [`gate_channel`], reusing an existing |00⟩ run of the same spec.
pub fn gate_channel_with_first(
    spec: &HamiltonianSpec,
    scheme: &PhononScheme,
    dt: f64,
    mode: ChannelMode,
    first: Run,
) -> Result<ChannelRun> {
    let inputs = basis_inputs(scheme);
    if first.state.scheme() != scheme {
        return Err(Error::Dimension("reused run has a different phonon scheme".into()));
    }
    let mut runs = vec![first];
    runs.extend(propagate_many(spec, scheme, &inputs[1..], dt)?);
    let states: Vec<JointState> = runs.iter().map(|r| r.state.clone()).collect();
    let channel = GateChannel::from_runs(&states, mode)?;
    Ok(ChannelRun { channel, runs })
}

/// Outcome of [`calibrate`].
#[derive(Debug, Clone)]
pub struct Calibration {
    pub pulse: Pulse,
    /// Product of all applied scale factors.
    pub factor: f64,
    /// Extracted χ before each rescaling and at the accepted pulse.
    pub trajectory: Vec<f64>,
    /// |00⟩ run of the accepted pulse.
    pub run: Run,
}

/// Rescales the pulse by √(χ_target/χ) until |χ − χ_target| < 10⁻⁶.
///
/// `max_iters` bounds the number of rescalings; each one costs a |00⟩ run.
/// `chi_target` is signed and must share the sign of the extracted χ.
pub fn calibrate(
    spec: &HamiltonianSpec,
    scheme: &PhononScheme,
    dt: f64,
    chi_target: f64,
    max_iters: usize,
) -> Result<Calibration> {
    let psi0 = JointState::basis(scheme, 0, 0);
    let mut pulse = spec.pulse.clone();
    let mut factor = 1.0;
    let mut trajectory = Vec::new();
    for iter in 0..=max_iters {
        let run = propagate(&spec.with_pulse(pulse.clone()), scheme, &psi0, dt)?;
        let chi = extract_chi(&run.state)?.chi;
        trajectory.push(chi);
        if (chi - chi_target).abs() < CALIBRATION_TOL {
            return Ok(Calibration { pulse, factor, trajectory, run });
        }
        if iter == max_iters {
            break;
        }
        let c = calibration_factor(chi_target, chi)?;
        pulse = pulse.scale(c)?;
        factor *= c;
    }
    Err(Error::CalibrationDiverged { iters: max_iters, trajectory })
}

/// Closed-form F̄_S for U = e^{i(χσ_xσ_x + λAΩ)} with A anticommuting with
/// σ_xσ_x:
/// (λ sin χ/χ)² {⟨A²Ω²⟩ − ⟨e^{−iχσ_xσ_x}AΩ⟩²}.
///
/// `a` is 4×4, `omega` is m×m, and `psi0` lives on the 4m-dimensional
/// product space ordered computational-major.
pub fn anticommuting_infidelity(chi: f64, lambda: f64, a: &Mat4, omega: &DMatrix<C64>, psi0: &DVector<C64>) -> f64 {
    let m = omega.nrows();
    let ao = kron4(a, omega);
    let ao2 = &ao * &ao;
    let rot = kron4(&xx_gate(-chi), &DMatrix::identity(m, m));
    let mean = |op: &DMatrix<C64>| psi0.dotc(&(op * psi0));
    let c = mean(&(rot * &ao));
    let pref = lambda * chi.sin() / chi;
    pref * pref * (mean(&ao2) - c * c).re
}

/// F̄_S for the same U by exact exponentiation of the Hermitian generator.
pub fn exact_error_infidelity(chi: f64, lambda: f64, a: &Mat4, omega: &DMatrix<C64>, psi0: &DVector<C64>) -> f64 {
    let m = omega.nrows();
    let id = DMatrix::identity(m, m);
    let h = kron4(&(pauli2(1, 1) * C64::new(chi, 0.0)), &id) + kron4(a, omega) * C64::new(lambda, 0.0);
    let u = expi_hermitian(&h);
    let ideal = kron4(&xx_gate(chi), &id);
    let amp = (ideal * psi0).dotc(&(u * psi0));
    1.0 - amp.norm_sqr()
}

/// e^{iH} for Hermitian H via its eigendecomposition.
pub fn expi_hermitian(h: &DMatrix<C64>) -> DMatrix<C64> {
    let eig = nalgebra::SymmetricEigen::new(h.clone());
    let v = &eig.eigenvectors;
    let phases = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| C64::from_polar(1.0, l)));
    v * phases * v.adjoint()
}

fn kron4(a: &Mat4, b: &DMatrix<C64>) -> DMatrix<C64> {
    let a = DMatrix::from_fn(4, 4, |i, j| a[(i, j)]);
    a.kronecker(b)
}

/// The eight computational operators anticommuting with σ_x⊗σ_x:
/// σ_y and σ_z on either ion, and σ_x⊗σ_y, σ_x⊗σ_z, σ_y⊗σ_x, σ_z⊗σ_x.
pub fn anticommuting_operators() -> [(&'static str, Mat4); 8] {
    [
        ("Y1", pauli2(2, 0)),
        ("Y2", pauli2(0, 2)),
        ("Z1", pauli2(3, 0)),
        ("Z2", pauli2(0, 3)),
        ("X1Y2", pauli2(1, 2)),
        ("X1Z2", pauli2(1, 3)),
        ("Y1X2", pauli2(2, 1)),
        ("Z1X2", pauli2(3, 1)),
    ]
}
