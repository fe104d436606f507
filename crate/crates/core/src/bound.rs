//! The second-order commutator functional
//!
//! ```text
//! F = tr{ [H, S] e^{−βH} ∫₀^β dσ S(−iσ) K(σ) } / tr e^{−βH},
//! S(−iσ) = e^{σH} S e^{−σH},
//! ```
//!
//! for a system Hamiltonian `H` and coupling operator `S` given as matrices
//! in a truncated basis. The overall constant relating `F` to
//! `⟨[H_S, V]⟩` is left out: only zeros, ratios and trends of `F` carry
//! meaning.
//!
//! In the eigenbasis of `H` each ordered pair of levels `(m, n)` contributes
//!
//! ```text
//! T_mn = (ε_m − ε_n) S_mn S_nm e^{−βε_n} ∫₀^β dσ K(σ) e^{σ(ε_n − ε_m)}.
//! ```
//!
//! [`bound_functional`] does the σ-integral exactly, one Matsubara mode at a
//! time. [`bound_functional_quadrature`] integrates the kernel numerically on
//! Gauss–Legendre nodes, as an independent check.
//!
//! Because `K(σ) = K(β − σ)`, the pair `(n, m)` carries exactly `−T_mn`, so
//! `F` vanishes for every `H` and `S`. The computed value is therefore a
//! rounding residue. [`BoundValue::scale`] reports `Σ|T_mn|/Z` so the
//! residue can be judged against the size of the individual contributions.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::bath::{kernel_series, SpectralKind};
use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;
use crate::series::{self, matsubara_sum, Neumaier, Summand};
use crate::{SpectralDensity, ThermalPoint};

const HERMITICITY_TOL: f64 = 1e-12;
const GL_START: usize = 64;
const GL_MAX: usize = 1024;
const GL_REL_TOL: f64 = 1e-9;

/// A system Hamiltonian and coupling operator in a basis of `L` states.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedSystem {
    h: DMatrix<Complex64>,
    s: DMatrix<Complex64>,
}

impl TruncatedSystem {
    /// Both matrices must be square, of equal size `L ≥ 2`, finite and
    /// Hermitian to `1e-12` relative to their largest entry.
    pub fn new(h: DMatrix<Complex64>, s: DMatrix<Complex64>) -> Result<Self> {
        let l = h.nrows();
        if l < 2 || !h.is_square() || s.shape() != h.shape() {
            return Err(Error::domain(format!(
                "need two square matrices of equal size L ≥ 2, got {:?} and {:?}",
                h.shape(),
                s.shape()
            )));
        }
        check_hermitian(&h, "Hamiltonian")?;
        check_hermitian(&s, "coupling operator")?;
        Ok(TruncatedSystem { h, s })
    }

    pub fn from_real(h: &DMatrix<f64>, s: &DMatrix<f64>) -> Result<Self> {
        Self::new(h.map(Complex64::from), s.map(Complex64::from))
    }

    /// Harmonic oscillator of frequency `omega` (unit mass) in its lowest
    /// `l` number states, coupled through `S = Σ_k coeffs[k] q^k`.
    ///
    /// Powers of `q` are formed in a basis enlarged by the polynomial degree
    /// and then cut back, so every retained matrix element is exact.
    pub fn harmonic(l: usize, omega: f64, coeffs: &[f64]) -> Result<Self> {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::domain(format!(
                "oscillator frequency must be positive, got {omega}"
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::domain("coupling coefficients must be finite"));
        }
        let big = l + coeffs.len();
        let (q, _) = harmonic_ladder(big, omega)?;
        let mut s = DMatrix::<Complex64>::zeros(big, big);
        for c in coeffs.iter().rev() {
            s = &s * &q;
            for i in 0..big {
                s[(i, i)] += *c;
            }
        }
        let h = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(l, |n, _| {
            Complex64::from(omega * (n as f64 + 0.5))
        }));
        Self::new(h, s.view((0, 0), (l, l)).into_owned())
    }

    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    pub fn h_matrix(&self) -> &DMatrix<Complex64> {
        &self.h
    }

    pub fn s_matrix(&self) -> &DMatrix<Complex64> {
        &self.s
    }
}

fn check_hermitian(a: &DMatrix<Complex64>, what: &str) -> Result<()> {
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::domain(format!("{what} has non-finite entries")));
    }
    let size = a.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let dev = (a - a.adjoint())
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    if dev > HERMITICITY_TOL * size {
        return Err(Error::domain(format!(
            "{what} is not Hermitian (deviation {dev:e})"
        )));
    }
    Ok(())
}

/// Position and momentum matrices of a unit-mass oscillator of frequency
/// `omega` in its lowest `l` number states.
pub fn harmonic_ladder(l: usize, omega: f64) -> Result<(DMatrix<Complex64>, DMatrix<Complex64>)> {
    if l == 0 {
        return Err(Error::domain("basis must hold at least one state"));
    }
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::domain(format!(
            "oscillator frequency must be positive, got {omega}"
        )));
    }
    let mut q = DMatrix::zeros(l, l);
    let mut p = DMatrix::zeros(l, l);
    for n in 0..l - 1 {
        let a = ((n + 1) as f64).sqrt();
        let xq = a / (2.0 * omega).sqrt();
        let xp = a * (0.5 * omega).sqrt();
        q[(n, n + 1)] = Complex64::from(xq);
        q[(n + 1, n)] = Complex64::from(xq);
        p[(n, n + 1)] = Complex64::new(0.0, -xp);
        p[(n + 1, n)] = Complex64::new(0.0, xp);
    }
    Ok((q, p))
}

/// Value of the functional. `value` is complex because nothing forces the
/// rounding residue to be real.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundValue {
    pub value: Complex64,
    /// `Σ|T_mn| / Z`, the size of the largest cancellation involved.
    pub scale: f64,
    /// Estimated absolute error of `value`.
    pub error: f64,
}

impl BoundValue {
    const ZERO: BoundValue = BoundValue {
        value: Complex64::new(0.0, 0.0),
        scale: 0.0,
        error: 0.0,
    };

    pub fn modulus(&self) -> f64 {
        self.value.norm()
    }
}

/// Eigenbasis data shared by both evaluation routes.
struct Spectrum {
    /// Energies shifted so the smallest is zero.
    eps: Vec<f64>,
    /// Boltzmann weights of the shifted energies.
    weight: Vec<f64>,
    z: f64,
    /// `(m, n, (ε_m − ε_n) S_mn S_nm)` for all ordered pairs with a nonzero
    /// product.
    pairs: Vec<(usize, usize, Complex64)>,
}

/// `None` when `[H, S]` vanishes exactly.
fn spectrum(ts: &TruncatedSystem, beta: f64) -> Option<Spectrum> {
    let comm = &ts.h * &ts.s - &ts.s * &ts.h;
    if comm.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
        return None;
    }
    let eig = SymmetricEigen::new(ts.h.clone());
    let u = &eig.eigenvectors;
    let s = u.adjoint() * &ts.s * u;
    let emin = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let eps: Vec<f64> = eig.eigenvalues.iter().map(|e| e - emin).collect();
    let weight: Vec<f64> = eps.iter().map(|e| (-beta * e).exp()).collect();
    let z = weight.iter().sum();
    let l = eps.len();
    let mut pairs = Vec::new();
    for m in 0..l {
        for n in 0..l {
            let c = (eps[m] - eps[n]) * s[(m, n)] * s[(n, m)];
            if c != Complex64::new(0.0, 0.0) {
                pairs.push((m, n, c));
            }
        }
    }
    Some(Spectrum {
        eps,
        weight,
        z,
        pairs,
    })
}

/// Evaluate the functional with the σ-integral done in closed form.
///
/// With `c = ε_n − ε_m` and `K` expanded in Matsubara modes,
/// `e^{−βε_n}∫₀^β K e^{cσ} dσ = (e^{−βε_m} − e^{−βε_n}) G(c)/c`, where
///
/// ```text
/// G(c) = (m/β) [Λ + 2 Σ_{l≥1} (Λ − ν_l γ̃(ν_l)) c²/(c² + ν_l²)],
/// ```
///
/// so no exponential of `cβ` is ever formed.
pub fn bound_functional(
    ts: &TruncatedSystem,
    sd: &SpectralDensity,
    tp: &ThermalPoint,
) -> Result<BoundValue> {
    if sd.gamma() == 0.0 {
        return Ok(BoundValue::ZERO);
    }
    let beta = tp.beta();
    let Some(sp) = spectrum(ts, beta) else {
        return Ok(BoundValue::ZERO);
    };
    let mut re = Neumaier::default();
    let mut im = Neumaier::default();
    let (mut scale, mut err) = (0.0, 0.0);
    for &(m, n, prod) in &sp.pairs {
        // prod = (ε_m − ε_n) S_mn S_nm = −c S_mn S_nm.
        let c = sp.eps[n] - sp.eps[m];
        let g = g_over_c(sd, tp, c)?;
        let t = prod * (sp.weight[m] - sp.weight[n]) * g.value;
        re.add(t.re);
        im.add(t.im);
        scale += t.norm();
        err += (prod * (sp.weight[m] - sp.weight[n])).norm() * g.error;
    }
    let value = Complex64::new(re.value(), im.value()) / sp.z;
    let scale = scale / sp.z;
    let roundoff = 8.0 * f64::EPSILON * scale * (sp.eps.len() as f64);
    Ok(BoundValue {
        value,
        scale,
        error: err / sp.z + roundoff,
    })
}

/// `G(c)/c` for `c ≠ 0`.
fn g_over_c(sd: &SpectralDensity, tp: &ThermalPoint, c: f64) -> Result<crate::Estimate> {
    let beta = tp.beta();
    let lam = sd.local_coupling();
    let sum = match sd.kind() {
        SpectralKind::Drude => matsubara_sum(
            &DrudeMode {
                gamma: sd.gamma(),
                d: sd.omega_d(),
                c2: c * c,
            },
            tp.omega_matsubara(),
        )?,
    };
    let f = sd.mass() / (beta * c);
    Ok(crate::Estimate {
        value: f * (lam + 2.0 * sum.value),
        error: 2.0 * f.abs() * sum.error,
    })
}

/// `(Λ − νγ̃(ν)) c²/(c² + ν²) = γd²/(d + ν) · c²/(c² + ν²)`.
struct DrudeMode {
    gamma: f64,
    d: f64,
    c2: f64,
}

impl Summand for DrudeMode {
    fn eval(&self, nu: f64) -> f64 {
        self.gamma * self.d * self.d / (self.d + nu) * self.c2 / (self.c2 + nu * nu)
    }

    fn radius(&self) -> f64 {
        2.0 * self.d.max(self.c2.sqrt())
    }

    fn expansion(&self, s: f64, order: usize) -> Vec<f64> {
        let (d, c2) = (self.d, self.c2);
        let num = [0.0, 0.0, 0.0, self.gamma * d * d * c2 / (s * s * s)];
        let den = [1.0, d / s, c2 / (s * s), d * c2 / (s * s * s)];
        series::series_div(&num, &den, order)
    }
}

/// Evaluate the functional by Gauss–Legendre quadrature of `K(σ)` over
/// `(0, ħβ)`, doubling the node count from 64 until the value changes by
/// less than `1e-9` of the scale.
///
/// With `reversed` the nodes are visited as `σ → ħβ − σ`; the result must
/// not depend on it.
pub fn bound_functional_quadrature(
    ts: &TruncatedSystem,
    sd: &SpectralDensity,
    tp: &ThermalPoint,
    reversed: bool,
) -> Result<BoundValue> {
    if sd.gamma() == 0.0 {
        return Ok(BoundValue::ZERO);
    }
    let beta = tp.beta();
    let Some(sp) = spectrum(ts, beta) else {
        return Ok(BoundValue::ZERO);
    };
    let mut prev: Option<BoundValue> = None;
    let mut n = GL_START;
    while n <= GL_MAX {
        let cur = gl_pass(&sp, sd, tp, n, reversed)?;
        if let Some(p) = prev {
            let change = (cur.value - p.value).norm();
            if change <= GL_REL_TOL * cur.scale.max(cur.modulus()) {
                return Ok(BoundValue {
                    error: change + cur.error,
                    ..cur
                });
            }
        }
        prev = Some(cur);
        n *= 2;
    }
    let p = prev.expect("at least one pass");
    Err(Error::accuracy(
        format!("bound quadrature did not settle with {GL_MAX} nodes"),
        p.scale,
    ))
}

fn gl_pass(
    sp: &Spectrum,
    sd: &SpectralDensity,
    tp: &ThermalPoint,
    n: usize,
    reversed: bool,
) -> Result<BoundValue> {
    let beta = tp.beta();
    let (x, w) = gauss_legendre(n);
    let mut re = Neumaier::default();
    let mut im = Neumaier::default();
    let (mut scale, mut err) = (0.0, 0.0);
    for (xi, wi) in x.iter().zip(&w) {
        let xi = if reversed { -xi } else { *xi };
        let sigma = 0.5 * beta * (1.0 + xi);
        let k = kernel_series(sd, tp, sigma)?;
        let f = 0.5 * beta * wi;
        for &(m, nn, prod) in &sp.pairs {
            // e^{−βε_n} e^{σ(ε_n − ε_m)} with non-negative exponents only.
            let boltz = (-(beta - sigma) * sp.eps[nn] - sigma * sp.eps[m]).exp();
            let t = prod * boltz * f;
            re.add(t.re * k.value);
            im.add(t.im * k.value);
            scale += t.norm() * k.value.abs();
            err += t.norm() * k.error;
        }
    }
    let scale = scale / sp.z;
    Ok(BoundValue {
        value: Complex64::new(re.value(), im.value()) / sp.z,
        scale,
        error: err / sp.z + 8.0 * f64::EPSILON * scale * (sp.eps.len() as f64),
    })
}

/// Moduli of the functional at each temperature in `thetas`, which must be
/// positive and strictly increasing.
pub fn markovian_limit_scan(
    ts: &TruncatedSystem,
    sd: &SpectralDensity,
    thetas: &[f64],
) -> Result<Vec<f64>> {
    if thetas.is_empty() {
        return Err(Error::domain("temperature list is empty"));
    }
    if thetas.iter().any(|t| !(*t > 0.0)) || thetas.windows(2).any(|p| p[0] >= p[1]) {
        return Err(Error::domain(
            "temperatures must be positive and strictly increasing",
        ));
    }
    thetas
        .par_iter()
        .map(|t| Ok(bound_functional(ts, sd, &ThermalPoint::new(*t)?)?.modulus()))
        .collect()
}

/// Values at basis sizes `L` and `2L` and their relative change.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationStudy {
    pub coarse: BoundValue,
    pub fine: BoundValue,
    /// `|F_2L − F_L| / |F_2L|`; zero when both vanish, infinite when only
    /// the fine value does.
    pub relative_change: f64,
}

/// Evaluate the functional on the systems produced by `build(l)` and
/// `build(2l)`.
pub fn truncation_study(
    l: usize,
    build: impl Fn(usize) -> Result<TruncatedSystem>,
    sd: &SpectralDensity,
    tp: &ThermalPoint,
) -> Result<TruncationStudy> {
    let coarse = bound_functional(&build(l)?, sd, tp)?;
    let fine = bound_functional(&build(2 * l)?, sd, tp)?;
    let diff = (fine.value - coarse.value).norm();
    let relative_change = match (diff == 0.0, fine.modulus() == 0.0) {
        (true, _) => 0.0,
        (false, true) => f64::INFINITY,
        (false, false) => diff / fine.modulus(),
    };
    Ok(TruncationStudy {
        coarse,
        fine,
        relative_change,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn sd(g: f64, d: f64) -> SpectralDensity {
        SpectralDensity::drude(g, d).unwrap()
    }

    fn tp(theta: f64) -> ThermalPoint {
        ThermalPoint::new(theta).unwrap()
    }

    #[test]
    fn ladder_satisfies_canonical_commutator() {
        let (q, p) = harmonic_ladder(30, 1.7).unwrap();
        let c = &q * &p - &p * &q;
        for i in 0..29 {
            assert_relative_eq!(c[(i, i)].im, 1.0, epsilon = 1e-13);
            assert!(c[(i, i)].re.abs() < 1e-14);
        }
        // H = p²/2 + ω²q²/2 is diagonal in the number basis.
        let h = (&p * &p + &q * &q * Complex64::from(1.7 * 1.7)) * Complex64::from(0.5);
        for i in 0..29 {
            assert_relative_eq!(h[(i, i)].re, 1.7 * (i as f64 + 0.5), max_relative = 1e-13);
        }
    }

    #[test]
    fn enlarged_basis_gives_exact_powers() {
        let ts = TruncatedSystem::harmonic(10, 1.0, &[0.0, 0.0, 1.0]).unwrap();
        // ⟨n|q²|n⟩ = n + 1/2 for ω = 1, including the last retained level.
        assert_relative_eq!(ts.s_matrix()[(9, 9)].re, 9.5, max_relative = 1e-14);
    }

    #[test]
    fn rejects_non_hermitian_input() {
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 2.0]);
        let s = DMatrix::identity(2, 2);
        assert!(matches!(
            TruncatedSystem::from_real(&h, &s),
            Err(Error::Domain(_))
        ));
        assert!(
            TruncatedSystem::from_real(&DMatrix::identity(1, 1), &DMatrix::identity(1, 1)).is_err()
        );
    }

    #[test]
    fn commuting_coupling_is_exactly_zero() {
        let ts = TruncatedSystem::harmonic(20, 1.0, &[0.0, 1.0]).unwrap();
        let s = ts.h_matrix() * ts.h_matrix();
        let ts = TruncatedSystem::new(ts.h_matrix().clone(), s).unwrap();
        let v = bound_functional(&ts, &sd(0.1, 5.0), &tp(1.0)).unwrap();
        assert_eq!(v, BoundValue::ZERO);
    }

    #[test]
    fn zero_coupling_is_exactly_zero() {
        let ts = TruncatedSystem::harmonic(20, 1.0, &[0.0, 1.0]).unwrap();
        let out = markovian_limit_scan(&ts, &sd(0.0, 5.0), &[0.1, 1.0, 10.0]).unwrap();
        assert_eq!(out, vec![0.0; 3]);
    }

    #[test]
    fn bilinear_coupling_vanishes() {
        let ts = TruncatedSystem::harmonic(60, 1.0, &[0.0, 1.0]).unwrap();
        let v = bound_functional(&ts, &sd(0.1, 5.0), &tp(1.0)).unwrap();
        assert!(v.modulus() < 1e-8);
        assert!(v.scale > 1e-3);
    }

    #[test]
    fn any_coupling_cancels_to_rounding() {
        // Pairwise cancellation holds for every H and S, not just the
        // harmonic bilinear case.
        let h = DMatrix::from_fn(6, 6, |i, j| {
            if i == j {
                (i * i) as f64 * 0.7
            } else {
                0.1 / (1 + i + j) as f64
            }
        });
        let s = DMatrix::from_fn(6, 6, |i, j| {
            ((i + 2 * j) as f64).sin() + ((j + 2 * i) as f64).sin()
        });
        let ts = TruncatedSystem::from_real(&h, &s).unwrap();
        for theta in [0.2, 1.0, 20.0] {
            let v = bound_functional(&ts, &sd(0.3, 4.0), &tp(theta)).unwrap();
            assert!(v.modulus() <= 1e-12 * v.scale, "θ={theta}: {v:?}");
            assert!(v.modulus() <= v.error);
        }
    }

    /// `sinh(x)/sinh(y)` for `y > 0` without overflow.
    fn sinh_ratio(x: f64, y: f64) -> f64 {
        if x < 0.0 {
            return -sinh_ratio(-x, y);
        }
        (x - y).exp() * (-2.0 * x).exp_m1() / (-2.0 * y).exp_m1()
    }

    #[test]
    fn single_pair_contribution_matches_real_frequency_route() {
        // ∫₀^β K(σ)e^{cσ}dσ from the spectral representation of K: the
        // σ-integral is elementary, leaving a smooth integral over ω.
        let s = sd(0.2, 3.0);
        let t = tp(0.7);
        let beta = t.beta();
        for c in [1.3, -0.4, 6.0] {
            let g = g_over_c(&s, &t, c).unwrap();
            let h = 0.5 * beta;
            let integrand = |w: f64| {
                if w == 0.0 {
                    return (c * h).exp() * 2.0 * s.slope_at_zero() / beta * 2.0 * (c * h).sinh()
                        / c
                        / PI;
                }
                let y = w * h;
                let first = sinh_ratio((c + w) * h, y) / (c + w);
                let x2 = (c - w) * h;
                let second = if x2.abs() > 1.0 {
                    sinh_ratio(x2, y) / (c - w)
                } else {
                    let sinhc = if x2 == 0.0 { 1.0 } else { x2.sinh() / x2 };
                    h * sinhc / y.sinh()
                };
                s.j(w) * (c * h).exp() * (first + second) / PI
            };
            let direct = crate::quadrature::integrate_half_line(
                integrand,
                &[3.0, c.abs(), 1.0 / beta],
                crate::quadrature::Tolerance {
                    abs: 1e-14,
                    ..Default::default()
                },
            )
            .unwrap();
            let closed = (c * beta).exp_m1() * g.value;
            assert_relative_eq!(direct.value, closed, max_relative = 1e-10);
        }
    }

    #[test]
    fn quadrature_route_agrees_and_is_reflection_invariant() {
        let ts = TruncatedSystem::harmonic(12, 1.0, &[0.0, 1.0, 1.0]).unwrap();
        let s = sd(0.1, 5.0);
        let t = tp(0.5);
        let a = bound_functional(&ts, &s, &t).unwrap();
        let b = bound_functional_quadrature(&ts, &s, &t, false).unwrap();
        let r = bound_functional_quadrature(&ts, &s, &t, true).unwrap();
        assert!((a.value - b.value).norm() <= 1e-9 * a.scale.max(b.scale));
        assert!((b.value - r.value).norm() <= 1e-12 * b.scale);
    }

    #[test]
    fn scan_rejects_unsorted_temperatures() {
        let ts = TruncatedSystem::harmonic(8, 1.0, &[0.0, 1.0]).unwrap();
        assert!(markovian_limit_scan(&ts, &sd(0.1, 5.0), &[1.0, 0.5]).is_err());
        assert!(markovian_limit_scan(&ts, &sd(0.1, 5.0), &[]).is_err());
    }

    #[test]
    fn truncation_study_of_a_vanishing_functional() {
        let build = |l| TruncatedSystem::harmonic(l, 1.0, &[0.0, 1.0]);
        let st = truncation_study(10, build, &sd(0.1, 5.0), &tp(1.0)).unwrap();
        assert!(st.fine.modulus() <= 1e-12 * st.fine.scale);
        assert!(st.coarse.modulus() <= 1e-12 * st.coarse.scale);
    }
}
