//! Equilibrium observables of a damped harmonic oscillator from Matsubara
//! sums.
//!
//! With `D(ν) = ω² + ν² + νγ̃(ν)` the reduced state of an oscillator of
//! frequency `ω` is Gaussian with
//!
//! ```text
//! ⟨q²⟩ = θ/ω² + 2θ Σ_{n≥1} 1/D(ν_n)
//! ⟨p²⟩ = ω²⟨q²⟩ + Δ,        Δ = 2θ Σ_{n≥1} ν_nγ̃(ν_n)/D(ν_n)
//! ln Z = −ln(βω) + Σ_{n≥1} ln(ν_n²/D(ν_n))
//! ```
//!
//! For the Drude bath `D(ν)(ω_D + ν)` is a cubic in `ν`, so every summand is
//! rational (or the logarithm of one) in `1/ν` and its large-`ν` expansion is
//! exact. The sums are evaluated by [`crate::series::matsubara_sum`].

use std::f64::consts::PI;

use serde::Serialize;

use crate::bath::{SpectralDensity, SpectralKind, ThermalPoint};
use crate::error::{Error, Result};
use crate::gaussian;
use crate::series::{self, matsubara_sum, Summand};
use crate::Estimate;

/// Equilibrium observables of one oscillator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OscillatorObservables {
    /// Squared system frequency the observables refer to.
    pub omega_sq: f64,
    pub q_var: Estimate,
    pub p_var: Estimate,
    pub delta: Estimate,
    pub log_z: Estimate,
    pub log_z_can: f64,
    /// `ln Z − ln Z_can`, summed directly rather than by subtraction.
    pub log_ratio: Estimate,
    pub entropy: Estimate,
    pub entropy_can: f64,
}

impl OscillatorObservables {
    /// `u = sqrt(⟨q²⟩⟨p²⟩)`, the symplectic eigenvalue of the reduced state.
    pub fn symplectic(&self) -> f64 {
        (self.q_var.value * self.p_var.value).sqrt()
    }
}

#[derive(Debug, Clone, Copy)]
enum Term {
    InverseD,
    Friction,
    LogRatio,
}

/// Summands built from `P(ν) = ν³ + dν² + (w + γd)ν + wd = D(ν)(d + ν)`.
struct DrudeSummand {
    term: Term,
    w: f64,
    gamma: f64,
    d: f64,
}

impl DrudeSummand {
    fn new(term: Term, sd: &SpectralDensity, w: f64) -> Self {
        match sd.kind() {
            SpectralKind::Drude => DrudeSummand {
                term,
                w,
                gamma: sd.gamma(),
                d: sd.omega_d(),
            },
        }
    }

    /// Coefficients of `p(u) = P(ν)/ν³` in `u = s/ν`.
    fn cubic(&self, s: f64) -> [f64; 4] {
        let (w, g, d) = (self.w, self.gamma, self.d);
        [1.0, d / s, (w + g * d) / (s * s), w * d / (s * s * s)]
    }
}

impl Summand for DrudeSummand {
    fn eval(&self, nu: f64) -> f64 {
        let (w, g, d) = (self.w, self.gamma, self.d);
        let friction = g * d * nu / (d + nu);
        match self.term {
            Term::InverseD => 1.0 / (w + nu * nu + friction),
            Term::Friction => friction / (w + nu * nu + friction),
            // −ln(1 + νγ̃/(ν² + w))
            Term::LogRatio => -(friction / (nu * nu + w)).ln_1p(),
        }
    }

    fn radius(&self) -> f64 {
        // Fujiwara bound on the roots of P, which also covers the pole at −d.
        let (w, g, d) = (self.w, self.gamma, self.d);
        2.0 * d
            .max((w + g * d).sqrt())
            .max((0.5 * w * d).cbrt())
            .max(w.sqrt())
    }

    fn expansion(&self, s: f64, order: usize) -> Vec<f64> {
        let (w, g, d) = (self.w, self.gamma, self.d);
        let p = self.cubic(s);
        match self.term {
            Term::InverseD => {
                series::series_div(&[0.0, 0.0, 1.0 / (s * s), d / (s * s * s)], &p, order)
            }
            Term::Friction => series::series_div(&[0.0, 0.0, g * d / (s * s)], &p, order),
            Term::LogRatio => {
                let lp = series::series_ln(&p, order);
                let l1 = series::series_ln(&[1.0, d / s], order);
                let l2 = series::series_ln(&[1.0, 0.0, w / (s * s)], order);
                (0..=order).map(|k| -(lp[k] - l1[k] - l2[k])).collect()
            }
        }
    }
}

fn check_frequency(omega_sq: f64) -> Result<()> {
    if !(omega_sq > 0.0 && omega_sq.is_finite()) {
        return Err(Error::Stability(format!(
            "squared system frequency must be positive, got {omega_sq}"
        )));
    }
    Ok(())
}

fn sum(term: Term, sd: &SpectralDensity, tp: &ThermalPoint, w: f64) -> Result<Estimate> {
    matsubara_sum(&DrudeSummand::new(term, sd, w), tp.omega_matsubara())
}

/// `ln Z_can = −ln(2 sinh(βω/2))`.
pub fn log_z_canonical(omega: f64, beta: f64) -> f64 {
    let x = beta * omega;
    // 2 sinh(x/2) = e^{x/2}(1 − e^{−x})
    -(0.5 * x + (-(-x).exp_m1()).ln())
}

/// Canonical entropy `(n̄+1)ln(n̄+1) − n̄ ln n̄` with `n̄ = 1/(e^{βω} − 1)`.
pub fn entropy_canonical(omega: f64, beta: f64) -> f64 {
    let x = beta * omega;
    let n = 1.0 / x.exp_m1();
    if n == 0.0 {
        return 0.0;
    }
    // (n+1)ln(1 + 1/n) + ln n
    (n + 1.0) * (1.0 / n).ln_1p() + n.ln()
}

/// `⟨q²⟩` of an oscillator with squared frequency `omega_sq`.
pub fn q_variance_at(sd: &SpectralDensity, tp: &ThermalPoint, omega_sq: f64) -> Result<Estimate> {
    check_frequency(omega_sq)?;
    let s = sum(Term::InverseD, sd, tp, omega_sq)?;
    let theta = tp.theta();
    Ok(Estimate {
        value: theta / omega_sq + 2.0 * theta * s.value,
        error: 2.0 * theta * s.error + f64::EPSILON * theta / omega_sq,
    })
}

/// `Δ` of an oscillator with squared frequency `omega_sq`.
pub fn squeezing_delta_at(
    sd: &SpectralDensity,
    tp: &ThermalPoint,
    omega_sq: f64,
) -> Result<Estimate> {
    check_frequency(omega_sq)?;
    if sd.gamma() == 0.0 {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
        });
    }
    let s = sum(Term::Friction, sd, tp, omega_sq)?;
    let theta = tp.theta();
    Ok(Estimate {
        value: 2.0 * theta * s.value,
        error: 2.0 * theta * s.error,
    })
}

/// `ln Z − ln Z_can` of an oscillator with squared frequency `omega_sq`.
pub fn log_partition_ratio_at(
    sd: &SpectralDensity,
    tp: &ThermalPoint,
    omega_sq: f64,
) -> Result<Estimate> {
    check_frequency(omega_sq)?;
    if sd.gamma() == 0.0 {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
        });
    }
    sum(Term::LogRatio, sd, tp, omega_sq)
}

/// All observables of an oscillator with squared frequency `omega_sq`.
pub fn oscillator_observables(
    sd: &SpectralDensity,
    tp: &ThermalPoint,
    omega_sq: f64,
) -> Result<OscillatorObservables> {
    let q_var = q_variance_at(sd, tp, omega_sq)?;
    let delta = squeezing_delta_at(sd, tp, omega_sq)?;
    let p_var = Estimate {
        value: omega_sq * q_var.value + delta.value,
        error: omega_sq * q_var.error + delta.error,
    };
    let log_ratio = log_partition_ratio_at(sd, tp, omega_sq)?;
    let omega = omega_sq.sqrt();
    let beta = tp.beta();
    let log_z_can = log_z_canonical(omega, beta);
    let log_z = Estimate {
        value: log_z_can + log_ratio.value,
        error: log_ratio.error + f64::EPSILON * log_z_can.abs(),
    };

    let u = (q_var.value * p_var.value).sqrt();
    let u_err = 0.5 * u * (q_var.error / q_var.value + p_var.error / p_var.value);
    if u < 0.5 - 1e-10 - u_err {
        return Err(Error::Consistency(format!(
            "reduced state violates the uncertainty bound: <q²><p²> = {}",
            u * u
        )));
    }
    let entropy = gaussian::mode_entropy(u.max(0.5));
    // dS/du = ln((u+½)/(u−½))
    let slope = if u > 0.5 {
        ((u + 0.5) / (u - 0.5)).ln()
    } else {
        0.0
    };
    Ok(OscillatorObservables {
        omega_sq,
        q_var,
        p_var,
        delta,
        log_z,
        log_z_can,
        log_ratio,
        entropy: Estimate {
            value: entropy,
            error: slope * u_err + f64::EPSILON * entropy,
        },
        entropy_can: entropy_canonical(omega, beta),
    })
}

/// Observables of the unit-frequency system oscillator.
pub fn observables(sd: &SpectralDensity, tp: &ThermalPoint) -> Result<OscillatorObservables> {
    oscillator_observables(sd, tp, 1.0)
}

/// `⟨q²⟩` of the system oscillator.
pub fn q_variance(sd: &SpectralDensity, tp: &ThermalPoint) -> Result<Estimate> {
    q_variance_at(sd, tp, 1.0)
}

/// Squeezing parameter `Δ = ⟨p²⟩ − ⟨q²⟩` of the system oscillator.
pub fn squeezing_delta(sd: &SpectralDensity, tp: &ThermalPoint) -> Result<Estimate> {
    squeezing_delta_at(sd, tp, 1.0)
}

/// `ln Z − ln Z_can` of the system oscillator.
pub fn log_partition_ratio(sd: &SpectralDensity, tp: &ThermalPoint) -> Result<Estimate> {
    log_partition_ratio_at(sd, tp, 1.0)
}

/// `ln(S/S_can)` of the system oscillator, with `S = −tr ρ ln ρ`.
pub fn entropy_ratio(sd: &SpectralDensity, tp: &ThermalPoint) -> Result<Estimate> {
    let obs = observables(sd, tp)?;
    if obs.entropy_can == 0.0 {
        return Err(Error::accuracy(
            "entropy ratio: canonical entropy underflows at this temperature",
            f64::INFINITY,
        ));
    }
    Ok(Estimate {
        value: (obs.entropy.value / obs.entropy_can).ln(),
        error: obs.entropy.error / obs.entropy.value + 4.0 * f64::EPSILON,
    })
}

/// Leading behaviour of `Δ` for `Ω ≫ ω_D`: `πγω_D/(6Ω)`.
pub fn delta_weak_coupling(sd: &SpectralDensity, tp: &ThermalPoint) -> f64 {
    PI * sd.mass() * sd.gamma() * sd.omega_d() / (6.0 * tp.omega_matsubara())
}

/// Leading behaviour of `Δ` for `Ω ≪ ω₀ ≪ ω_D`: `(γ/π) ln(ω_D/ω₀)`.
///
/// Only the logarithmic growth in `ω_D` is meaningful; corrections are
/// `O(ω₀/ω_D)` and `O(Ω/ω₀)`.
pub fn delta_strong_coupling(sd: &SpectralDensity) -> f64 {
    sd.mass() * sd.gamma() / PI * sd.omega_d().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn drude(g: f64, d: f64) -> SpectralDensity {
        SpectralDensity::drude(g, d).unwrap()
    }

    fn tp(theta: f64) -> ThermalPoint {
        ThermalPoint::new(theta).unwrap()
    }

    /// Brute-force partial sum plus an integral tail, for moderate parameters.
    fn brute(sd: &SpectralDensity, t: &ThermalPoint, w: f64, term: Term) -> f64 {
        let g = DrudeSummand::new(term, sd, w);
        let omega = t.omega_matsubara();
        let n = 2_000_000usize;
        let mut acc = series::Neumaier::default();
        for k in (1..=n).rev() {
            acc.add(g.eval(k as f64 * omega));
        }
        // Tail ≈ ∫_{(n+½)Ω}^∞ g(ν) dν/Ω with g ≈ c/ν².
        let nu = (n as f64 + 0.5) * omega;
        let c = g.eval(nu) * nu * nu;
        acc.value() + c / (nu * omega)
    }

    #[test]
    fn sums_match_brute_force() {
        for (g, d, theta, w) in [
            (0.1, 10.0, 0.5, 1.0),
            (1.0, 3.0, 0.2, 0.9),
            (0.05, 1.0, 2.0, 1.1),
        ] {
            let sd = drude(g, d);
            let t = tp(theta);
            for term in [Term::InverseD, Term::Friction, Term::LogRatio] {
                let fast = sum(term, &sd, &t, w).unwrap();
                let slow = brute(&sd, &t, w, term);
                assert_relative_eq!(fast.value, slow, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn undamped_oscillator_is_canonical() {
        let sd = drude(0.0, 10.0);
        for theta in [0.05, 0.3, 1.0, 20.0] {
            let t = tp(theta);
            let obs = observables(&sd, &t).unwrap();
            let q = 0.5 / (0.5 / theta).tanh();
            assert_relative_eq!(obs.q_var.value, q, max_relative = 1e-13);
            assert_relative_eq!(obs.p_var.value, q, max_relative = 1e-13);
            assert_eq!(obs.delta.value, 0.0);
            assert_eq!(obs.log_ratio.value, 0.0);
            assert_relative_eq!(obs.entropy.value, obs.entropy_can, max_relative = 1e-8);
        }
    }

    #[test]
    fn canonical_closed_forms() {
        let beta = 1.0;
        assert_relative_eq!(
            log_z_canonical(1.0, beta),
            -(2.0 * 0.5f64.sinh()).ln(),
            max_relative = 1e-15
        );
        let n = 1.0 / (1f64.exp() - 1.0);
        let s = (n + 1.0) * (n + 1.0).ln() - n * n.ln();
        assert_relative_eq!(entropy_canonical(1.0, beta), s, max_relative = 1e-14);
        assert_eq!(entropy_canonical(1.0, 1e4), 0.0);
        // Large-β branch of ln Z_can stays finite.
        assert_relative_eq!(log_z_canonical(1.0, 1e3), -500.0, max_relative = 1e-15);
    }

    #[test]
    fn classical_limit_of_position_variance() {
        let q = q_variance(&drude(0.1, 10.0), &tp(1000.0)).unwrap();
        assert_relative_eq!(q.value / 1000.0, 1.0, max_relative = 1e-3);
    }

    #[test]
    fn delta_matches_gamma_derivative() {
        // Δ = −2γθ ∂ ln Z/∂γ
        let (g, d, t) = (0.3, 7.0, tp(0.4));
        let h = 1e-5;
        let up = log_partition_ratio(&drude(g + h, d), &t).unwrap().value;
        let dn = log_partition_ratio(&drude(g - h, d), &t).unwrap().value;
        let fd = -2.0 * g * t.theta() * (up - dn) / (2.0 * h);
        let delta = squeezing_delta(&drude(g, d), &t).unwrap().value;
        assert_relative_eq!(delta, fd, max_relative = 1e-7);
    }

    #[test]
    fn weak_coupling_asymptote() {
        let sd = drude(0.1, 1.0);
        let t = tp(1e3);
        let delta = squeezing_delta(&sd, &t).unwrap().value;
        assert_relative_eq!(delta, delta_weak_coupling(&sd, &t), max_relative = 2e-2);
    }

    #[test]
    fn strong_coupling_log_growth() {
        let t = tp(0.1);
        let d1 = squeezing_delta(&drude(0.1, 1e3), &t).unwrap().value;
        let d2 = squeezing_delta(&drude(0.1, 1e4), &t).unwrap().value;
        let slope = (d2 - d1) / 10f64.ln();
        assert_relative_eq!(slope, 0.1 / PI, max_relative = 2e-2);
    }

    #[test]
    fn large_cutoff_is_summable() {
        let obs = observables(&drude(0.1, 1e4), &tp(0.01)).unwrap();
        assert!(obs.delta.value > 0.0);
        assert!(obs.q_var.error < 1e-10 * obs.q_var.value);
    }

    #[test]
    fn rejects_unstable_frequency() {
        let sd = drude(0.1, 1.0);
        assert!(matches!(
            oscillator_observables(&sd, &tp(1.0), -0.1),
            Err(Error::Stability(_))
        ));
    }

    #[test]
    fn high_temperature_agrees_with_canonical() {
        let sd = drude(0.1, 100.0);
        let t = tp(100.0);
        assert!(log_partition_ratio(&sd, &t).unwrap().value.abs() < 1e-3);
        assert!(entropy_ratio(&sd, &t).unwrap().value.abs() < 1e-3);
    }
}
