use thiserror::Error;

/// Errors raised by the library.
///
/// `is_numerical` separates numerical-gate failures (integrator drift,
/// non-convergence) from input validation problems; the CLI maps them to
/// different exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed document: {0}")]
    Malformed(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid chain: {0}")]
    InvalidChain(String),
    #[error("invalid gate pair ({j1},{j2}) for a {n}-ion chain")]
    InvalidPair { j1: usize, j2: usize, n: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("basis tone {n} collides with mode {p} (|w_n - w_p| = {gap:.3e} rad/s)")]
    Collision { n: i64, p: usize, gap: f64 },
    #[error("constraint null space is empty ({rows} constraints, {cols} basis tones)")]
    NullSpaceEmpty { rows: usize, cols: usize },
    #[error("projected chi kernel is numerically zero; no entanglement reachable in this basis")]
    NoEntanglement,
    #[error("time {t:e} s outside [0, {tau:e}] s")]
    TimeOutOfRange { t: f64, tau: f64 },
    #[error("phonon space dimension {dim} exceeds cap {cap}")]
    DimensionCap { dim: usize, cap: usize },
    #[error("equilibrium solve did not converge after {iters} iterations (residual {residual:e})")]
    NewtonDiverged { iters: usize, residual: f64 },
    #[error("unstable transverse mode {index} (squared frequency {value:e})")]
    UnstableMode { index: usize, value: f64 },
    #[error("norm drift {drift:e} at t = {t:e} s exceeds gate {limit:e}; reduce dt (currently {dt:e} s)")]
    NormDrift { drift: f64, t: f64, limit: f64, dt: f64 },
    #[error("state left the |00>,|11> manifold (|<00|psi>| = {p00:e}, |<11|psi>| = {p11:e})")]
    ManifoldLost { p00: f64, p11: f64 },
    #[error("calibration did not converge in {iters} iterations; chi trajectory {trajectory:?}")]
    CalibrationDiverged { iters: usize, trajectory: Vec<f64> },
    #[error("phonon scheme did not converge before the dimension cap; last infidelity {infidelity:e}")]
    SchemeNotConverged { infidelity: f64 },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of a numerical gate rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NormDrift { .. }
                | Error::CalibrationDiverged { .. }
                | Error::SchemeNotConverged { .. }
                | Error::NewtonDiverged { .. }
                | Error::ManifoldLost { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
