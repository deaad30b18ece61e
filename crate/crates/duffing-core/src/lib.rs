//! Driven-dissipative Kerr (Duffing) oscillator toolkit.
//!
//! The crate models a single bosonic mode with Hamiltonian
//! `H = Δ a†a + U a†a†aa + (ξ a† + ξ* a) + ξ₂ (a² + a†²)`
//! coupled to energy relaxation, dephasing, thermal, and two-photon loss
//! channels. It provides:
//!
//! * truncated Fock-space operators and canonical states ([`fock`]),
//! * the Lindblad superoperator as a dense `D²×D²` matrix ([`liouvillian`]),
//! * steady states, full Liouvillian spectra, the spectral gap, and
//!   metastable-manifold decompositions ([`spectral`]),
//! * time evolution, pulsed state preparation, hysteresis loops, and
//!   thermodynamic-scaling scans ([`dynamics`]),
//! * exact steady-state moments, the exact Wigner function, `g²(0)`, and
//!   Gaussian squeezing levels via log-scaled hypergeometric series
//!   ([`analytic`]),
//! * the classical mean-field cubic and hysteresis boundaries ([`classical`]),
//! * moment-based Wigner reconstruction ([`tomography`]),
//! * amplification-chain and resonator calibration models ([`chain`]).
//!
//! All angular frequencies and rates are in consistent inverse-time units;
//! the test suite and CLI work in 1/µs. The [`chain`] module is the one
//! place with absolute units (watts, kelvin, Hz).
//!
//! Column-stacking vectorization is fixed project-wide:
//! `vec(AρB) = (Bᵀ ⊗ A) vec(ρ)`.
//!
//! With the `parallel` feature (on by default) grid-type workloads fan out
//! over a rayon pool; without it the same code runs sequentially.

pub mod analytic;
pub mod chain;
pub mod classical;
pub mod dynamics;
mod error;
pub mod fock;
pub mod liouvillian;
pub mod optim;
mod par;
pub mod spectral;
pub mod tomography;

pub use error::Error;
pub use fock::{DensityMatrix, Operator, SystemParams};
pub use liouvillian::LiouvillianMatrix;
pub use spectral::LiouvillianSpectrum;

/// Convenient complex scalar alias used throughout.
pub type C64 = num_complex::Complex64;

/// Crate-wide result type.
pub type Result<T> = std::result::Result<T, Error>;
