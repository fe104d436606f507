//! Exact reference solutions for finite discretized baths.
//!
//! A continuous spectral density is replaced by `N` oscillators per system
//! coordinate, coupled through `½ m_j ω_j² (q_j − q)²`. The resulting
//! quadratic Hamiltonian is solved exactly: thermal states follow from its
//! normal modes, and the partition function from normal-mode frequencies.
//! Nothing here uses Matsubara sums, which makes the module an independent
//! check on [`crate::equilibrium`] and [`crate::entanglement`].

mod bordered;

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::bath::{SpectralDensity, ThermalPoint};
use crate::error::{Error, Result};
use crate::gaussian::{self, GaussianState};
use crate::series::Neumaier;
use bordered::{Bordered, SystemMode};

/// Largest bath size accepted per system coordinate.
pub const MAX_BATH: usize = 10_000;
/// Largest total dimension for routes that need the full dense state.
pub const MAX_DENSE: usize = 2_000;

/// How a continuous spectral density is turned into discrete modes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscretizationRule {
    pub n_bath: usize,
    /// Highest bin edge in units of the cutoff frequency.
    pub omega_max: f64,
}

impl DiscretizationRule {
    /// Default reach `1000·ω_D`. The Drude tail beyond `Xω_D` carries a
    /// friction weight of about `1/X`, and at `X = 50` that alone shifts
    /// `ln(Z/Z_can)` by ~1e-3 relative at high temperature.
    pub fn new(n_bath: usize) -> Self {
        DiscretizationRule {
            n_bath,
            omega_max: 1000.0,
        }
    }
}

/// A finite system-plus-bath model with one or two system oscillators, each
/// carrying its own copy of the discretized bath.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StarModel {
    bath_frequencies: Vec<f64>,
    bath_masses: Vec<f64>,
    system_count: usize,
    system_frequency: f64,
    system_coupling: f64,
}

/// Discretize `sd` into a single-oscillator star model.
///
/// Nodes sit at the midpoints of an equal-step grid in `arctan(ω/ω_D)` up to
/// `omega_max·ω_D`; with bin width `w_j` the masses are
/// `m_j = (2/π) J(ω_j) w_j / ω_j³`, so that `(π/2) m_j ω_j³ / w_j = J(ω_j)`.
/// A bath with `γ = 0` is empty.
pub fn discretize(sd: &SpectralDensity, rule: &DiscretizationRule) -> Result<StarModel> {
    if rule.n_bath == 0 {
        return Err(Error::domain("discretization needs at least one bath mode"));
    }
    if rule.n_bath > MAX_BATH {
        return Err(Error::domain(format!(
            "at most {MAX_BATH} bath modes are supported, got {}",
            rule.n_bath
        )));
    }
    if !(rule.omega_max > 0.0 && rule.omega_max.is_finite()) {
        return Err(Error::domain("omega_max must be positive"));
    }
    if sd.gamma() == 0.0 {
        return Ok(StarModel::bare(1, 0.0));
    }
    let d = sd.omega_d();
    let h = rule.omega_max.atan() / rule.n_bath as f64;
    let (freqs, masses) = (0..rule.n_bath)
        .map(|j| {
            let jf = j as f64;
            let w = d * (((jf + 0.5) * h).tan());
            let width = d * (((jf + 1.0) * h).tan() - (jf * h).tan());
            (w, 2.0 / PI * sd.j(w) * width / (w * w * w))
        })
        .unzip();
    Ok(StarModel {
        bath_frequencies: freqs,
        bath_masses: masses,
        system_count: 1,
        system_frequency: 1.0,
        system_coupling: 0.0,
    })
}

/// Two oscillators coupled by `−c q₁q₂`, each with an identical copy of the
/// discretized bath.
pub fn discretize_pair(
    sd: &SpectralDensity,
    rule: &DiscretizationRule,
    c: f64,
) -> Result<StarModel> {
    if !c.is_finite() {
        return Err(Error::domain("coupling must be finite"));
    }
    let single = discretize(sd, rule)?;
    Ok(StarModel {
        system_count: 2,
        system_coupling: c,
        ..single
    })
}

impl StarModel {
    fn bare(system_count: usize, c: f64) -> Self {
        StarModel {
            bath_frequencies: Vec::new(),
            bath_masses: Vec::new(),
            system_count,
            system_frequency: 1.0,
            system_coupling: c,
        }
    }

    /// Bath modes per system oscillator.
    pub fn n_bath(&self) -> usize {
        self.bath_frequencies.len()
    }

    pub fn bath_frequencies(&self) -> &[f64] {
        &self.bath_frequencies
    }

    pub fn bath_masses(&self) -> &[f64] {
        &self.bath_masses
    }

    pub fn system_count(&self) -> usize {
        self.system_count
    }

    pub fn system_frequency(&self) -> f64 {
        self.system_frequency
    }

    pub fn system_coupling(&self) -> f64 {
        self.system_coupling
    }

    /// Coupling stiffness `k_j = m_j ω_j²` of each bath mode.
    pub fn coupling_stiffness(&self) -> Vec<f64> {
        self.bath_frequencies
            .iter()
            .zip(&self.bath_masses)
            .map(|(w, m)| m * w * w)
            .collect()
    }

    /// Effective coupling of the discrete bath, `Σ_j k_j z/(ω_j² + z²)`.
    pub fn effective_coupling(&self, z: f64) -> f64 {
        let mut acc = Neumaier::default();
        for (k, w) in self.coupling_stiffness().iter().zip(&self.bath_frequencies) {
            acc.add(k * z / (w * w + z * z));
        }
        acc.value()
    }

    /// Total number of coordinates: systems first, then each system's bath.
    pub fn dim(&self) -> usize {
        self.system_count * (1 + self.n_bath())
    }

    fn index_of_bath(&self, system: usize, j: usize) -> usize {
        self.system_count + system * self.n_bath() + j
    }

    /// Diagonal of the mass matrix.
    pub fn masses(&self) -> Vec<f64> {
        let mut m = vec![1.0; self.system_count];
        for _ in 0..self.system_count {
            m.extend_from_slice(&self.bath_masses);
        }
        m
    }

    /// Stiffness matrix of the potential, counterterms included.
    pub fn stiffness(&self) -> DMatrix<f64> {
        let n = self.dim();
        let w2 = self.system_frequency * self.system_frequency;
        let k = self.coupling_stiffness();
        let mut v = DMatrix::zeros(n, n);
        for r in 0..self.system_count {
            v[(r, r)] = w2;
            for (j, &kj) in k.iter().enumerate() {
                let b = self.index_of_bath(r, j);
                v[(r, r)] += kj;
                v[(b, b)] = kj;
                v[(r, b)] = -kj;
                v[(b, r)] = -kj;
            }
        }
        if self.system_count == 2 {
            v[(0, 1)] = -self.system_coupling;
            v[(1, 0)] = -self.system_coupling;
        }
        v
    }

    /// Mass-weighted Hessian `M^{-1/2} V M^{-1/2}`.
    pub fn mass_weighted_hessian(&self) -> DMatrix<f64> {
        let inv: Vec<f64> = self.masses().iter().map(|m| 1.0 / m.sqrt()).collect();
        let mut h = self.stiffness();
        for i in 0..h.nrows() {
            for j in 0..h.ncols() {
                h[(i, j)] *= inv[i] * inv[j];
            }
        }
        h
    }

    fn bordered(&self) -> Bordered {
        let k = self.coupling_stiffness();
        let mut entries: Vec<(f64, f64, u8)> = (0..self.system_count)
            .flat_map(|r| {
                self.bath_frequencies
                    .iter()
                    .zip(&k)
                    .map(move |(w, &kj)| (w * w, kj, r as u8))
            })
            .collect();
        entries.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));
        Bordered {
            s: self.system_count,
            w: self.system_frequency * self.system_frequency,
            c: self.system_coupling,
            poles: entries.iter().map(|e| e.0).collect(),
            k: entries.iter().map(|e| e.1).collect(),
            owner: entries.iter().map(|e| e.2).collect(),
        }
    }

    /// Solve for the normal modes.
    pub fn normal_modes(&self) -> Result<NormalModes> {
        let bordered = self.bordered();
        let modes = bordered.solve()?;
        if let Some(m) = modes.iter().find(|m| !(m.lambda > 0.0)) {
            return Err(Error::Model(format!(
                "non-positive normal-mode frequency² {}",
                m.lambda
            )));
        }
        Ok(NormalModes {
            system_count: self.system_count,
            system_frequency: self.system_frequency,
            system_coupling: self.system_coupling,
            modes,
            poles: bordered.poles,
        })
    }
}

/// Normal modes of a star model, projected on the system coordinates.
#[derive(Debug, Clone)]
pub struct NormalModes {
    system_count: usize,
    system_frequency: f64,
    system_coupling: f64,
    modes: Vec<SystemMode>,
    poles: Vec<f64>,
}

/// `−ln(2 sinh(βx/2))`.
fn log_z_mode(x: f64, beta: f64) -> f64 {
    -(0.5 * beta * x + (-(-beta * x).exp()).ln_1p())
}

impl NormalModes {
    /// Normal-mode frequencies, ascending.
    pub fn frequencies(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.lambda.sqrt()).collect()
    }

    /// Quantum thermal covariance of the system coordinates.
    pub fn quantum_reduced_state(&self, tp: &ThermalPoint) -> Result<GaussianState> {
        let beta = tp.beta();
        let s = self.system_count;
        let mut q = [[Neumaier::default(); 2]; 2];
        let mut p = [[Neumaier::default(); 2]; 2];
        for m in &self.modes {
            let om = m.lambda.sqrt();
            let coth = 1.0 / (0.5 * beta * om).tanh();
            let fq = 0.5 * coth / om;
            let fp = 0.5 * coth * om;
            for r in 0..s {
                for c in 0..s {
                    q[r][c].add(fq * m.weight[r][c]);
                    p[r][c].add(fp * m.weight[r][c]);
                }
            }
        }
        let mut sigma = DMatrix::zeros(2 * s, 2 * s);
        for r in 0..s {
            for c in 0..s {
                sigma[(2 * r, 2 * c)] = q[r][c].value();
                sigma[(2 * r + 1, 2 * c + 1)] = p[r][c].value();
            }
        }
        GaussianState::new(sigma)
    }

    /// `ln Z − ln Z_can` with `Z = Z_total/Z_bath` and `Z_can` the canonical
    /// partition function of the bare system Hamiltonian.
    pub fn partition_ratio(&self, tp: &ThermalPoint) -> f64 {
        let beta = tp.beta();
        let s = self.system_count;
        let mut acc = Neumaier::default();
        for m in &self.modes[..s] {
            acc.add(log_z_mode(m.lambda.sqrt(), beta));
        }
        // Interlacing pairs eigenvalue k with pole k − s.
        for (m, &pole) in self.modes[s..].iter().zip(&self.poles) {
            let (a, b) = (m.lambda.sqrt(), pole.sqrt());
            let diff = (m.lambda - pole) / (a + b);
            let tail = (-(-beta * a).exp()).ln_1p() - (-(-beta * b).exp()).ln_1p();
            acc.add(-(0.5 * beta * diff + tail));
        }
        let w2 = self.system_frequency * self.system_frequency;
        let can = if s == 1 {
            log_z_mode(self.system_frequency, beta)
        } else {
            log_z_mode((w2 - self.system_coupling).sqrt(), beta)
                + log_z_mode((w2 + self.system_coupling).sqrt(), beta)
        };
        acc.value() - can
    }
}

/// Quantum reduced state of the system oscillator(s).
pub fn quantum_reduced_state(sm: &StarModel, tp: &ThermalPoint) -> Result<GaussianState> {
    sm.normal_modes()?.quantum_reduced_state(tp)
}

/// Classical reduced covariance of the system coordinates, ordered
/// `(q₁, p₁, …)`.
///
/// The position block is `θ` times the inverse of the Schur complement of the
/// bath block in the stiffness matrix. Each bath mode contributes
/// `k_j − k_j²/k_j` to it, so the counterterm cancels mode by mode.
pub fn classical_reduced_state(sm: &StarModel, tp: &ThermalPoint) -> Result<DMatrix<f64>> {
    let theta = tp.theta();
    let w2 = sm.system_frequency * sm.system_frequency;
    let k = sm.coupling_stiffness();
    let mut shift = Neumaier::default();
    for &kj in &k {
        shift.add(kj - kj * kj / kj);
    }
    let diag = w2 + shift.value();
    let s = sm.system_count;
    let schur = if s == 1 {
        DMatrix::from_element(1, 1, diag)
    } else {
        DMatrix::from_row_slice(
            2,
            2,
            &[diag, -sm.system_coupling, -sm.system_coupling, diag],
        )
    };
    let inv = schur
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Model("stiffness matrix is not positive definite".into()))?
        .inverse();
    let mut sigma = DMatrix::zeros(2 * s, 2 * s);
    for r in 0..s {
        for c in 0..s {
            sigma[(2 * r, 2 * c)] = theta * inv[(r, c)];
        }
        sigma[(2 * r + 1, 2 * r + 1)] = theta;
    }
    Ok(sigma)
}

/// `ln Z − ln Z_can` from normal-mode frequencies.
pub fn partition_ratio(sm: &StarModel, tp: &ThermalPoint) -> Result<f64> {
    Ok(sm.normal_modes()?.partition_ratio(tp))
}

/// Moments entering `ΔH_S ΔV ≥ ½|⟨[H_S, V]⟩|` in the exact thermal state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UncertaintyQuantities {
    pub delta_hs: f64,
    pub delta_v: f64,
    pub commutator_abs: f64,
}

impl UncertaintyQuantities {
    pub fn slack(&self) -> f64 {
        self.delta_hs * self.delta_v - 0.5 * self.commutator_abs
    }
}

/// Full thermal state in mass-weighted phase-space coordinates
/// `(y, π) = (√m q, p/√m)`, by dense diagonalization.
pub fn full_thermal_state(sm: &StarModel, tp: &ThermalPoint) -> Result<GaussianState> {
    let n = sm.dim();
    if n > MAX_DENSE {
        return Err(Error::domain(format!(
            "full state limited to {MAX_DENSE} coordinates, model has {n}"
        )));
    }
    let eig = SymmetricEigen::new(sm.mass_weighted_hessian());
    let beta = tp.beta();
    let mut fq = DVector::zeros(n);
    let mut fp = DVector::zeros(n);
    for (i, &lam) in eig.eigenvalues.iter().enumerate() {
        if !(lam > 0.0) {
            return Err(Error::Model(format!(
                "non-positive normal-mode frequency² {lam}"
            )));
        }
        let om = lam.sqrt();
        let coth = 1.0 / (0.5 * beta * om).tanh();
        fq[i] = 0.5 * coth / om;
        fp[i] = 0.5 * coth * om;
    }
    let v = &eig.eigenvectors;
    let qq = v * DMatrix::from_diagonal(&fq) * v.transpose();
    let pp = v * DMatrix::from_diagonal(&fp) * v.transpose();
    let mut sigma = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            sigma[(2 * i, 2 * j)] = 0.5 * (qq[(i, j)] + qq[(j, i)]);
            sigma[(2 * i + 1, 2 * j + 1)] = 0.5 * (pp[(i, j)] + pp[(j, i)]);
        }
    }
    // Dense diagonalization leaves absolute errors of order ε‖σ‖ per entry.
    let slack =
        gaussian::PHYSICALITY_SLACK.max(64.0 * f64::EPSILON * (2 * n) as f64 * sigma.amax());
    GaussianState::with_slack(sigma, slack)
}

/// Phase-space forms of `H_S` and `V = Σ_j ½ m_j ω_j² (q_j − q)²` in the
/// coordinates of [`full_thermal_state`].
pub fn hamiltonian_forms(sm: &StarModel) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = sm.dim();
    let w2 = sm.system_frequency * sm.system_frequency;
    let mut hs = DMatrix::zeros(2 * n, 2 * n);
    for r in 0..sm.system_count {
        hs[(2 * r, 2 * r)] = w2;
        hs[(2 * r + 1, 2 * r + 1)] = 1.0;
    }
    if sm.system_count == 2 {
        hs[(0, 2)] = -sm.system_coupling;
        hs[(2, 0)] = -sm.system_coupling;
    }
    // ½ k_j (y_j/√m_j − y_r)² = ½ (ω_j y_j − √k_j y_r)².
    let mut v = DMatrix::zeros(2 * n, 2 * n);
    let k = sm.coupling_stiffness();
    for r in 0..sm.system_count {
        for (j, (&kj, &wj)) in k.iter().zip(&sm.bath_frequencies).enumerate() {
            let b = sm.index_of_bath(r, j);
            let (yb, yr) = (2 * b, 2 * r);
            v[(yb, yb)] += wj * wj;
            v[(yr, yr)] += kj;
            let off = -wj * kj.sqrt();
            v[(yb, yr)] += off;
            v[(yr, yb)] += off;
        }
    }
    (hs, v)
}

/// `ΔH_S`, `ΔV` and `|⟨[H_S, V]⟩|` in the exact thermal state.
pub fn uncertainty_quantities(sm: &StarModel, tp: &ThermalPoint) -> Result<UncertaintyQuantities> {
    let state = full_thermal_state(sm, tp)?;
    let (hs, v) = hamiltonian_forms(sm);
    let m = gaussian::quadratic_moments(&state, &v, &hs)?;
    Ok(UncertaintyQuantities {
        delta_hs: m.var_c.max(0.0).sqrt(),
        delta_v: m.var_a.max(0.0).sqrt(),
        commutator_abs: m.commutator_abs(),
    })
}
