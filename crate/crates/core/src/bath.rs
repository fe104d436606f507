//! Harmonic bath models: spectral density `J(ω)`, power spectrum, effective
//! coupling `γ̃(ν)` and the imaginary-time bath kernel `K(σ)`.
//!
//! `K(σ)` is available by two independent routes. [`kernel_quadrature`]
//! integrates the spectral representation
//!
//! ```text
//! K(σ) = (1/π) ∫₀^∞ dω J(ω) cosh(ω(β/2 − σ)) / sinh(ωβ/2)
//! ```
//!
//! and [`kernel_series`] sums the differentiated Matsubara series
//! `(2m/β) Σ_l ν_l γ̃(ν_l) cos(ν_l σ)` after removing its local part. The local
//! part is the `ν → ∞` limit `Λ = lim ν γ̃(ν)` of the summand; each Fourier
//! mode carries `Λ − ν_l γ̃(ν_l)` and the zero mode contributes `mΛ/β`:
//!
//! ```text
//! K(σ) = mΛ/β + (2m/β) Σ_{l≥1} [Λ − ν_l γ̃(ν_l)] cos(ν_l σ),   0 < σ < β.
//! ```
//!
//! What is dropped is the periodic comb `mΛ Σ_n δ(σ − nβ)`, which is
//! invisible on the open interval. The differentiated series itself equals
//! `comb − K(σ)`, so the sign of the oscillating part is flipped relative to
//! it; with this convention both routes produce the same function.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{self, Tolerance};
use crate::series::{Neumaier, MAX_TERMS};
use crate::Estimate;

/// Family of the bath spectral density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpectralKind {
    /// Ohmic with a Lorentzian (Drude) high-frequency cutoff.
    Drude,
}

/// A parametrized bath spectral density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralDensity {
    kind: SpectralKind,
    gamma: f64,
    omega_d: f64,
    mass: f64,
}

impl SpectralDensity {
    /// Drude bath `J(ω) = mγω ω_D²/(ω² + ω_D²)` with unit system mass.
    pub fn drude(gamma: f64, omega_d: f64) -> Result<Self> {
        Self::new(SpectralKind::Drude, gamma, omega_d, 1.0)
    }

    pub fn new(kind: SpectralKind, gamma: f64, omega_d: f64, mass: f64) -> Result<Self> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::domain(format!(
                "damping rate must be >= 0, got {gamma}"
            )));
        }
        if !(omega_d > 0.0 && omega_d.is_finite()) {
            return Err(Error::domain(format!(
                "cutoff frequency must be > 0, got {omega_d}"
            )));
        }
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::domain(format!(
                "system mass must be > 0, got {mass}"
            )));
        }
        Ok(SpectralDensity {
            kind,
            gamma,
            omega_d,
            mass,
        })
    }

    pub fn kind(&self) -> SpectralKind {
        self.kind
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn omega_d(&self) -> f64 {
        self.omega_d
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Same bath with a different damping rate.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::new(self.kind, gamma, self.omega_d, self.mass)
    }

    /// `J(ω)`; no domain check.
    pub(crate) fn j(&self, omega: f64) -> f64 {
        match self.kind {
            SpectralKind::Drude => {
                let d2 = self.omega_d * self.omega_d;
                self.mass * self.gamma * omega * d2 / (omega * omega + d2)
            }
        }
    }

    /// `J′(0)`.
    pub fn slope_at_zero(&self) -> f64 {
        match self.kind {
            SpectralKind::Drude => self.mass * self.gamma,
        }
    }

    /// `γ̃(ν)` in closed form; no domain check.
    pub(crate) fn gamma_tilde(&self, nu: f64) -> f64 {
        match self.kind {
            SpectralKind::Drude => self.gamma / (1.0 + nu / self.omega_d),
        }
    }

    /// `Λ = lim_{ν→∞} ν γ̃(ν)`, the local part of the Matsubara kernel.
    pub fn local_coupling(&self) -> f64 {
        match self.kind {
            SpectralKind::Drude => self.gamma * self.omega_d,
        }
    }
}

/// Dimensionless operating temperature `θ = k_BT/ħω₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalPoint {
    theta: f64,
}

impl ThermalPoint {
    pub fn new(theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::domain(format!(
                "temperature must be > 0, got {theta}"
            )));
        }
        Ok(ThermalPoint { theta })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// `ħβ` in units of `1/ω₀`.
    pub fn beta(&self) -> f64 {
        1.0 / self.theta
    }

    /// Fundamental Matsubara frequency `Ω = 2πθ`.
    pub fn omega_matsubara(&self) -> f64 {
        2.0 * PI * self.theta
    }

    /// `ν_n = nΩ`.
    pub fn matsubara(&self, n: u64) -> f64 {
        n as f64 * self.omega_matsubara()
    }
}

/// `J(ω)`.
pub fn spectral_density(sd: &SpectralDensity, omega: f64) -> Result<f64> {
    if !(omega >= 0.0) {
        return Err(Error::domain(format!(
            "frequency must be >= 0, got {omega}"
        )));
    }
    Ok(sd.j(omega))
}

/// Power spectrum `I(ω,T) = ħ J(ω) coth(ħβω/2)`, with its `ω → 0` limit
/// `2J′(0)/β`.
pub fn power_spectrum(sd: &SpectralDensity, tp: &ThermalPoint, omega: f64) -> Result<f64> {
    if !(omega >= 0.0) {
        return Err(Error::domain(format!(
            "frequency must be >= 0, got {omega}"
        )));
    }
    if omega == 0.0 {
        return Ok(2.0 * sd.slope_at_zero() / tp.beta());
    }
    Ok(sd.j(omega) / (0.5 * tp.beta() * omega).tanh())
}

/// Effective coupling `γ̃(ν)` from its closed form.
pub fn effective_coupling_closed(sd: &SpectralDensity, nu: f64) -> Result<f64> {
    if !(nu >= 0.0) {
        return Err(Error::domain(format!(
            "Matsubara frequency must be >= 0, got {nu}"
        )));
    }
    Ok(sd.gamma_tilde(nu))
}

/// Effective coupling from its integral representation
/// `γ̃(z) = (1/m) ∫₀^∞ (dω/π) (J(ω)/ω) 2z/(ω² + z²)`.
pub fn effective_coupling_integral(sd: &SpectralDensity, z: f64) -> Result<Estimate> {
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::domain(format!(
            "effective coupling integral needs z > 0, got {z}"
        )));
    }
    if sd.gamma == 0.0 {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
        });
    }
    let integrand = |w: f64| {
        let j_over_w = if w == 0.0 {
            sd.slope_at_zero()
        } else {
            sd.j(w) / w
        };
        j_over_w * 2.0 * z / (w * w + z * z) / (PI * sd.mass)
    };
    quadrature::integrate_half_line(integrand, &[sd.omega_d, z], Tolerance::default())
        .map_err(|e| relabel(e, "effective coupling integral"))
}

fn check_sigma(tp: &ThermalPoint, sigma: f64) -> Result<()> {
    let beta = tp.beta();
    if !(sigma >= 0.0 && sigma <= beta) {
        return Err(Error::domain(format!(
            "imaginary time must lie in [0, {beta}], got {sigma}"
        )));
    }
    Ok(())
}

fn relabel(e: Error, what: &str) -> Error {
    match e {
        Error::Accuracy { context, estimate } => Error::Accuracy {
            context: format!("{what}: {context}"),
            estimate,
        },
        other => other,
    }
}

/// `K(σ)` by quadrature over the spectral density.
///
/// The kernel diverges logarithmically at `σ = 0` and `σ = ħβ` for the Drude
/// bath; those endpoints return an accuracy error with an infinite estimate.
pub fn kernel_quadrature(sd: &SpectralDensity, tp: &ThermalPoint, sigma: f64) -> Result<Estimate> {
    check_sigma(tp, sigma)?;
    if sd.gamma == 0.0 {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
        });
    }
    let beta = tp.beta();
    let s = sigma.min(beta - sigma);
    if s <= 0.0 {
        return Err(Error::accuracy(
            "kernel quadrature: K(σ) diverges at the endpoints",
            f64::INFINITY,
        ));
    }
    let (s1, s2) = (sigma, beta - sigma);
    let integrand = |w: f64| {
        if w == 0.0 {
            return 2.0 * sd.slope_at_zero() / (PI * beta);
        }
        // cosh(ω(β/2 − σ))/sinh(ωβ/2) without overflow.
        let weight = ((-w * s1).exp() + (-w * s2).exp()) / -(-w * beta).exp_m1();
        sd.j(w) * weight / PI
    };
    let scales = [sd.omega_d, 1.0 / s, 1.0 / beta];
    quadrature::integrate_half_line(integrand, &scales, Tolerance::default())
        .map_err(|e| relabel(e, "kernel quadrature"))
}

/// `K(σ)` from the Matsubara series with the local part removed.
///
/// The series converges only conditionally. Terms are summed explicitly until
/// the partial sums of `e^{ilx}` have averaged out, and the remaining tail
/// is resummed by repeated summation by parts, which turns it into a rapidly
/// converging series in `z/(1 − z)` with `z = e^{ix}`.
pub fn kernel_series(sd: &SpectralDensity, tp: &ThermalPoint, sigma: f64) -> Result<Estimate> {
    check_sigma(tp, sigma)?;
    if sd.gamma == 0.0 {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
        });
    }
    let beta = tp.beta();
    if sigma <= 0.0 || sigma >= beta {
        return Err(Error::domain(
            "kernel series is defined on the open interval (0, ħβ)",
        ));
    }
    match sd.kind {
        SpectralKind::Drude => drude_kernel_series(sd, tp, sigma),
    }
}

fn drude_kernel_series(sd: &SpectralDensity, tp: &ThermalPoint, sigma: f64) -> Result<Estimate> {
    let beta = tp.beta();
    let omega = tp.omega_matsubara();
    let d = sd.omega_d;
    // Λ − ν_lγ̃(ν_l) = γd²/(d + lΩ) = (γd²/Ω)/(l + a).
    let a = d / omega;
    let constant = sd.mass * sd.local_coupling() / beta;
    let pref = 2.0 * sd.mass * sd.gamma * d * d / (beta * omega);

    let x = omega * sigma;
    let s = (0.5 * x).sin();
    // The tail expansion below converges like ((k+1)/(2s(a+m)))^k.
    let explicit = (TAIL_REACH / s - a).ceil().max(0.0);
    if explicit > MAX_TERMS as f64 {
        return Err(Error::accuracy(
            "kernel series: σ too close to the endpoints",
            f64::INFINITY,
        ));
    }
    let n = explicit as usize;
    let mut head = Neumaier::default();
    let mut abs_head = 0.0;
    for l in 1..=n {
        let t = (l as f64 * x).cos() / (l as f64 + a);
        head.add(t);
        abs_head += t.abs();
    }
    let (tail, tail_err) = oscillating_tail(x, n + 1, a)?;
    let sum = head.value() + tail;
    let value = constant + pref * sum;
    let roundoff = 16.0 * f64::EPSILON * (constant + pref * (abs_head + tail.abs()));
    Ok(Estimate {
        value,
        error: pref * tail_err + roundoff,
    })
}

const TAIL_REACH: f64 = 40.0;
const TAIL_TERMS: usize = 400;

/// `Σ_{l≥m} cos(lx)/(l + a)` for `0 < x < 2π` by iterated summation by parts,
/// `Σ_{l≥m} z^l g(l) = z^m/(1−z) Σ_k (z/(1−z))^k Δ^k g(m)`, using the exact
/// differences `Δ^k g(m) = (−1)^k k!/((m+a)(m+a+1)⋯(m+a+k))`.
fn oscillating_tail(x: f64, m: usize, a: f64) -> Result<(f64, f64)> {
    use num_complex::Complex64;
    let z = Complex64::from_polar(1.0, x);
    let q = z / (1.0 - z);
    let lead = Complex64::from_polar(1.0, m as f64 * x) / (1.0 - z);
    let b = m as f64 + a;
    // term_k = (−q)^k k!/(b(b+1)⋯(b+k))
    let mut term = Complex64::new(1.0 / b, 0.0);
    let mut acc = term;
    for k in 1..TAIL_TERMS {
        term *= -q * (k as f64 / (b + k as f64));
        acc += term;
        if term.norm() <= 1e-17 * acc.norm() {
            // Remaining terms shrink at least geometrically once this small.
            return Ok(((lead * acc).re, 2.0 * term.norm() / (2.0 * (0.5 * x).sin())));
        }
    }
    Err(Error::accuracy(
        "kernel series: tail expansion did not converge",
        term.norm(),
    ))
}
