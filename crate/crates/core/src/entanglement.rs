//! Two identical oscillators coupled by `−c q₁q₂`, each with its own bath.
//!
//! Identical independent baths decouple in the normal coordinates
//! `Q± = (q₁ ± q₂)/√2`, whose squared frequencies are `1 ∓ c`. The pair state
//! is assembled from two single-oscillator Matsubara problems.

use rayon::prelude::*;

use nalgebra::DMatrix;

use crate::equilibrium::oscillator_observables;
use crate::error::{Error, Result};
use crate::gaussian::{logarithmic_negativity, GaussianState, PHYSICALITY_SLACK};
use crate::{Estimate, SpectralDensity, ThermalPoint};

/// Resolution of the crossing temperature.
pub const CROSSING_TOL: f64 = 1e-4;
const CROSSING_GRID_PER_DECADE: usize = 20;

/// Two coupled oscillators with identical, independent baths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoupledPair {
    c: f64,
    sd: SpectralDensity,
}

impl CoupledPair {
    /// `0 ≤ c < 1`. A negative coupling is the image of `|c|` under
    /// `q₂ → −q₂` and has the same negativity; it is not accepted directly.
    pub fn new(c: f64, sd: SpectralDensity) -> Result<Self> {
        if !c.is_finite() || c < 0.0 {
            return Err(Error::domain(format!(
                "coupling must be finite and non-negative, got {c} (use |c| and flip q₂)"
            )));
        }
        if c >= 1.0 {
            return Err(Error::Stability(format!(
                "H_S is not positive definite for c = {c} ≥ 1"
            )));
        }
        Ok(CoupledPair { c, sd })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn spectral_density(&self) -> &SpectralDensity {
        &self.sd
    }

    /// `(ω₊, ω₋) = (√(1 − c), √(1 + c))`.
    pub fn mode_frequencies(&self) -> (f64, f64) {
        ((1.0 - self.c).sqrt(), (1.0 + self.c).sqrt())
    }
}

/// Pair covariance in the order `(q₁, p₁, q₂, p₂)` with per-entry absolute
/// error bound, plus the normal-mode variances it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct PairState {
    pub state: GaussianState,
    pub error: f64,
    /// `(⟨Q₊²⟩, ⟨P₊²⟩)`.
    pub plus: (Estimate, Estimate),
    /// `(⟨Q₋²⟩, ⟨P₋²⟩)`.
    pub minus: (Estimate, Estimate),
}

pub fn pair_covariance(cp: &CoupledPair, tp: &ThermalPoint) -> Result<PairState> {
    let plus = oscillator_observables(&cp.sd, tp, 1.0 - cp.c)?;
    let minus = oscillator_observables(&cp.sd, tp, 1.0 + cp.c)?;
    let (qp, pp) = (plus.q_var, plus.p_var);
    let (qm, pm) = (minus.q_var, minus.p_var);
    let q_diag = 0.5 * (qp.value + qm.value);
    let q_off = 0.5 * (qp.value - qm.value);
    let p_diag = 0.5 * (pp.value + pm.value);
    let p_off = 0.5 * (pp.value - pm.value);
    #[rustfmt::skip]
    let sigma = DMatrix::from_row_slice(4, 4, &[
        q_diag, 0.0,    q_off,  0.0,
        0.0,    p_diag, 0.0,    p_off,
        q_off,  0.0,    q_diag, 0.0,
        0.0,    p_off,  0.0,    p_diag,
    ]);
    let error = 0.5 * (qp.error + qm.error).max(pp.error + pm.error);
    Ok(PairState {
        state: GaussianState::with_slack(sigma, PHYSICALITY_SLACK.max(4.0 * error))?,
        error,
        plus: (qp, pp),
        minus: (qm, pm),
    })
}

/// Logarithmic negativity of the pair.
///
/// Transposing oscillator 2 swaps `P₊ ↔ P₋`, so the partially transposed
/// symplectic eigenvalues are `√(⟨Q₊²⟩⟨P₋²⟩)` and `√(⟨Q₋²⟩⟨P₊²⟩)`; the error
/// estimate propagates the variance errors through them.
pub fn negativity(cp: &CoupledPair, tp: &ThermalPoint) -> Result<Estimate> {
    if cp.c == 0.0 {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
        });
    }
    let ps = pair_covariance(cp, tp)?;
    let value = logarithmic_negativity(&ps.state, &[1])?;
    let (qp, pp) = ps.plus;
    let (qm, pm) = ps.minus;
    let error = [(qp, pm), (qm, pp)]
        .iter()
        .filter(|(q, p)| (q.value * p.value).sqrt() < 0.5 + 1e-6)
        .map(|(q, p)| 0.5 * (q.error / q.value + p.error / p.value))
        .sum::<f64>()
        + 64.0 * f64::EPSILON * value.max(1.0);
    Ok(Estimate { value, error })
}

/// `E_N` on the grid `thetas × ds` at fixed `c` and `γ`, θ-major.
pub fn negativity_surface(c: f64, gamma: f64, thetas: &[f64], ds: &[f64]) -> Result<Vec<Estimate>> {
    let points: Vec<(f64, f64)> = thetas
        .iter()
        .flat_map(|t| ds.iter().map(move |d| (*t, *d)))
        .collect();
    points
        .par_iter()
        .map(|&(t, d)| {
            let cp = CoupledPair::new(c, SpectralDensity::drude(gamma, d)?)?;
            negativity(&cp, &ThermalPoint::new(t)?)
        })
        .collect()
}

/// Temperature `θ*` above which the pair is no longer entangled.
///
/// `E_N` is scanned on a logarithmic grid from `lo` upward until it first
/// vanishes, then the last sign change is bisected to `CROSSING_TOL`.
/// Returns `None` if the pair is not entangled at `lo`, and an accuracy
/// error if it is still entangled at `hi`.
pub fn crossing_temperature(cp: &CoupledPair, lo: f64, hi: f64) -> Result<Option<Estimate>> {
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::domain(format!("need 0 < lo < hi, got [{lo}, {hi}]")));
    }
    let entangled =
        |t: f64| -> Result<bool> { Ok(negativity(cp, &ThermalPoint::new(t)?)?.value > 0.0) };
    if !entangled(lo)? {
        return Ok(None);
    }
    let steps = ((hi / lo).log10() * CROSSING_GRID_PER_DECADE as f64)
        .ceil()
        .max(1.0) as usize;
    let ratio = (hi / lo).powf(1.0 / steps as f64);
    let (mut a, mut b) = (lo, None);
    for k in 1..=steps {
        let t = if k == steps {
            hi
        } else {
            lo * ratio.powi(k as i32)
        };
        if entangled(t)? {
            a = t;
        } else {
            b = Some(t);
            break;
        }
    }
    let Some(mut b) = b else {
        return Err(Error::accuracy(
            format!("pair still entangled at θ = {hi}"),
            f64::INFINITY,
        ));
    };
    while b - a > CROSSING_TOL {
        let m = 0.5 * (a + b);
        if entangled(m)? {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(Some(Estimate {
        value: 0.5 * (a + b),
        error: 0.5 * (b - a),
    }))
}
