//! Thermal equilibrium of harmonic systems coupled to harmonic baths.
//!
//! All quantities are in natural units `ħ = k_B = m₀ = ω₀ = 1`: temperatures
//! are `θ = k_BT/ħω₀`, frequencies are in units of the bare system frequency.
//!
//! The crate is organised around an analytic route and an exact oracle:
//!
//! - [`bath`]: spectral densities, the bath power spectrum, the effective
//!   coupling `γ̃(ν)` and the imaginary-time bath kernel `K(σ)`.
//! - [`equilibrium`]: Matsubara-sum observables of a single damped oscillator.
//! - [`gaussian`]: covariance-matrix machinery for Gaussian states.
//! - [`oracle`]: finite discretized baths solved exactly.
//! - [`bound`]: the second-order commutator functional for arbitrary
//!   system Hamiltonians in a truncated basis.
//! - [`entanglement`]: two coupled oscillators with independent baths.
//! - [`scan`]: grid scans and single-point runs behind the `clequil` CLI.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bath;
pub mod bound;
pub mod entanglement;
pub mod equilibrium;
pub mod error;
pub mod gaussian;
pub mod oracle;
pub mod quadrature;
pub mod scan;
pub mod series;

pub use bath::{SpectralDensity, SpectralKind, ThermalPoint};
pub use error::{Error, Result};

/// A computed value with an estimate of its absolute error.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}
