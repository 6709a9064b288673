//! Mølmer–Sørensen XX-gate toolkit for trapped-ion chains.
//!
//! Sine-basis control pulses are synthesized from a linear closure system,
//! analysed through closed-form spectral functionals and Magnus-expansion
//! error controls, and propagated exactly in a truncated phonon Fock space.

pub mod chain;
pub mod error;
pub mod fidelity;
pub mod fock;
pub mod functionals;
pub mod integrals;
pub mod magnus;
pub mod pulse;
pub mod quadrature;

pub use chain::{ChainSpec, GatePair};
pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
